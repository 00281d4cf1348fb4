import { AnnotationApi } from "./api.js";
import { AnnotationApp } from "./app.js";

/**
 * Browser entry point. Configuration is one base URL:
 *
 *   index.html?api=http://localhost:8731&annotator=alice
 *
 * ?api defaults to the page's own origin (serve the built files behind the
 * same host as the service and no parameter is needed). The annotator id is
 * remembered in localStorage after the first visit.
 */
function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = (params.get("api") ?? "").replace(/\/$/, "");

  let annotator = params.get("annotator") ?? localStorage.getItem("annotatorId");
  if (!annotator) {
    annotator = window.prompt("Annotator id?")?.trim() || "anonymous";
  }
  localStorage.setItem("annotatorId", annotator);

  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  const app = new AnnotationApp(root, new AnnotationApi(baseUrl), annotator);
  void app.start();
}

bootstrap();
