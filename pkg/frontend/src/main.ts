/** Browser entry point: mount the app on #app, same-origin API. */

import { initApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  initApp(root, "", { defaultUser: "demo", defaultDb: "school" });
}
