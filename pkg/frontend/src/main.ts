import { ApiClient } from "./api";
import { ConsolePane, HandsetPane } from "./ui";

document.addEventListener("DOMContentLoaded", () => {
  // separate clients: the handset is unauthenticated, the console holds a token
  new HandsetPane(new ApiClient("")).mount();
  new ConsolePane(new ApiClient("")).mount();
});
