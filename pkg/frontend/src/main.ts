import { ApiClient } from "./api.js";
import { Dashboard } from "./dashboard.js";

new Dashboard(new ApiClient()).start();
