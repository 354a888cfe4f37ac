/**
 * Entry point: mount the review view against the service.
 *
 * The dev server proxies /api to the Python service, so the default base is
 * same-origin; a different service can be targeted with ?api=http://host:port.
 */

import "./style.css";
import { ReviewApi } from "./api";
import { SessionView } from "./view";

const params = new URLSearchParams(window.location.search);
const api = new ReviewApi(params.get("api") ?? "");

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}

const view = new SessionView(root, api);
void view.start();
