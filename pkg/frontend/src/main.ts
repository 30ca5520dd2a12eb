import { ApiClient } from "./api.js";
import { App } from "./app.js";

// Backend base URL can be overridden at runtime, e.g. when the static files
// are served from a different origin than the API.
declare global {
  interface Window {
    CITEGRAPH_API_BASE?: string;
  }
}

const root = document.getElementById("app");
if (root) {
  const app = new App(root, new ApiClient(window.CITEGRAPH_API_BASE ?? ""));
  app.render();
}
