import type {
  Ad,
  Category,
  ContentItem,
  DashboardData,
  InboxMessage,
  LoginResponse,
  Question,
  SmsRouting,
  Sponsor,
  SubscriberRow,
  UssdReply,
} from "./types";

export class ApiRequestError extends Error {
  constructor(public status: number, public code: string, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the backend HTTP surface. */
export class ApiClient {
  private token: string | null = null;

  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchFn(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiRequestError(
        response.status,
        payload.error ?? "Unknown",
        payload.detail ?? response.statusText,
      );
    }
    return payload as T;
  }

  // simulated telco wire ----------------------------------------------------

  simUssd(msisdn: string, session: string | null, text: string): Promise<UssdReply> {
    return this.request("POST", "/sim/ussd", { msisdn, session, text });
  }

  simSms(msisdn: string, shortcode: string, text: string): Promise<SmsRouting> {
    return this.request("POST", "/sim/sms", { msisdn, shortcode, text });
  }

  async inbox(msisdn: string): Promise<InboxMessage[]> {
    const data = await this.request<{ messages: InboxMessage[] }>(
      "GET", `/sim/inbox/${msisdn}`);
    return data.messages;
  }

  // staff api -----------------------------------------------------------------

  login(username: string, password: string): Promise<LoginResponse> {
    return this.request("POST", "/api/v1/auth/login", { username, password });
  }

  dashboard(): Promise<DashboardData> {
    return this.request("GET", "/api/v1/reports/dashboard");
  }

  sponsors(): Promise<Sponsor[]> {
    return this.request("GET", "/api/v1/sponsors");
  }

  createSponsor(name: string, contact: string): Promise<Sponsor> {
    return this.request("POST", "/api/v1/sponsors", { name, contact });
  }

  deposit(sponsorId: number, amount: number): Promise<{ sponsor_id: number; balance: number }> {
    return this.request("POST", `/api/v1/sponsors/${sponsorId}/deposit`, { amount });
  }

  ads(): Promise<Ad[]> {
    return this.request("GET", "/api/v1/ads");
  }

  createAd(sponsorId: number, body: string): Promise<Ad> {
    return this.request("POST", "/api/v1/ads", { sponsor_id: sponsorId, body_sw: body });
  }

  categories(): Promise<Category[]> {
    return this.request("GET", "/api/v1/categories");
  }

  createCategory(name: string, parentId: number | null, position: number): Promise<Category> {
    return this.request("POST", "/api/v1/categories",
      { name_sw: name, parent_id: parentId, position });
  }

  content(): Promise<ContentItem[]> {
    return this.request("GET", "/api/v1/content");
  }

  createContent(categoryId: number, body: string): Promise<ContentItem> {
    return this.request("POST", "/api/v1/content",
      { category_id: categoryId, body_sw: body });
  }

  questions(status?: "Open" | "Answered"): Promise<Question[]> {
    const query = status ? `?status=${status}` : "";
    return this.request("GET", `/api/v1/questions${query}`);
  }

  answerQuestion(questionId: number, text: string): Promise<{ id: number }> {
    return this.request("POST", `/api/v1/questions/${questionId}/answer`, { text });
  }

  subscribers(): Promise<SubscriberRow[]> {
    return this.request("GET", "/api/v1/subscribers");
  }
}
