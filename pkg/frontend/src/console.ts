import { ApiClient } from "./api";
import type { DashboardData, LoginResponse, Question, Sponsor } from "./types";

export type Section =
  | "dashboard"
  | "sponsors"
  | "ads"
  | "categories"
  | "subscribers"
  | "content"
  | "questions";

// navigation is derived from the permissions the backend grants; the
// console itself enforces nothing beyond hiding screens
const SECTION_PERMISSION: Record<Section, string> = {
  dashboard: "view_reports",
  sponsors: "manage_sponsors",
  ads: "manage_ads",
  categories: "manage_categories",
  subscribers: "view_subscribers",
  content: "manage_content",
  questions: "view_questions",
};

const SECTION_ORDER: Section[] = [
  "dashboard", "sponsors", "ads", "categories", "subscribers",
  "content", "questions",
];

/** Staff-side session: authentication plus the role-scoped view model. */
export class ConsoleSession {
  profile: LoginResponse | null = null;

  constructor(private api: ApiClient) {}

  get loggedIn(): boolean {
    return this.profile !== null;
  }

  get role(): string {
    return this.profile?.group ?? "";
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    const profile = await this.api.login(username, password);
    this.api.setToken(profile.token);
    this.profile = profile;
    return profile;
  }

  logout(): void {
    this.profile = null;
    this.api.setToken(null);
  }

  visibleSections(): Section[] {
    const granted = new Set(this.profile?.permissions ?? []);
    return SECTION_ORDER.filter((s) => granted.has(SECTION_PERMISSION[s]));
  }

  canSee(section: Section): boolean {
    return this.visibleSections().includes(section);
  }

  dashboard(): Promise<DashboardData> {
    return this.api.dashboard();
  }

  sponsors(): Promise<Sponsor[]> {
    return this.api.sponsors();
  }

  /** Top up and return the authoritative new balance from the backend. */
  async topUpSponsor(sponsorId: number, amount: number): Promise<number> {
    const result = await this.api.deposit(sponsorId, amount);
    return result.balance;
  }

  questions(status?: "Open" | "Answered"): Promise<Question[]> {
    return this.api.questions(status);
  }

  /** One-click answer from the question inbox. */
  async answerQuestion(questionId: number, text: string): Promise<void> {
    await this.api.answerQuestion(questionId, text);
  }
}
