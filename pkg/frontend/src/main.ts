/** Browser bootstrap: wires the API client and the app to #app.
 * The service base URL comes from ?api=… or defaults to the page origin.
 */

import { ApiClient } from "./api.js";
import { App } from "./view.js";

export function bootstrap(): App | null {
  if (typeof document === "undefined") return null;
  const root = document.getElementById("app");
  if (!root) return null;
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("api") ?? window.location.origin;
  const conversationId = params.get("conversation") ?? undefined;
  const app = new App(new ApiClient(baseUrl), root);
  void app.init(conversationId);
  return app;
}

bootstrap();
