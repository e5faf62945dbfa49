import { ApiClient, ApiRequestError } from "./api";
import { ConsoleSession, Section } from "./console";
import { Handset } from "./handset";
import type { Question, Sponsor } from "./types";

const POLL_MS = 2000;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, className = "", text = ""): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function must(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

// -- handset pane ------------------------------------------------------------

export class HandsetPane {
  private handset: Handset;

  constructor(api: ApiClient) {
    this.handset = new Handset(api, "255712000001", () => this.render());
  }

  mount(): void {
    (must("msisdn") as HTMLInputElement).value = this.handset.state.msisdn;
    must("btn-set-msisdn").onclick = () => {
      this.handset.setMsisdn((must("msisdn") as HTMLInputElement).value.trim());
    };
    must("btn-dial").onclick = () => {
      void this.handset.dial((must("dial-code") as HTMLInputElement).value.trim());
    };
    must("btn-reply").onclick = () => void this.sendInput();
    (must("dialog-input") as HTMLInputElement).onkeydown = (event) => {
      if (event.key === "Enter") void this.sendInput();
    };
    must("btn-sms").onclick = () => {
      const shortcode = (must("sms-shortcode") as HTMLInputElement).value.trim();
      const text = (must("sms-text") as HTMLInputElement).value.trim();
      void this.handset.sendSms(shortcode, text);
    };
    window.setInterval(() => void this.handset.refreshInbox(), POLL_MS);
    this.render();
  }

  private async sendInput(): Promise<void> {
    const input = must("dialog-input") as HTMLInputElement;
    await this.handset.send(input.value.trim());
    input.value = "";
  }

  private render(): void {
    const state = this.handset.state;
    const banner = must("handset-banner");
    banner.textContent = state.banner ?? "";
    banner.classList.toggle("hidden", state.banner === null);

    const dialog = must("ussd-dialog");
    dialog.classList.toggle("hidden", state.dialogText === null);
    // byte-for-byte: the dialog shows exactly the wire reply text
    must("ussd-text").textContent = state.dialogText ?? "";
    must("dialog-reply-row").classList.toggle("hidden", !state.dialogOpen);
    must("routing").textContent =
      state.lastRouting ? `SMS routed as: ${state.lastRouting}` : "";

    const list = must("inbox-list");
    list.replaceChildren();
    for (const message of [...state.inbox].reverse()) {
      const item = el("li", `sms kind-${message.kind.toLowerCase()}`);
      item.append(el("span", "sms-kind", message.kind),
                  el("p", "sms-body", message.body),
                  el("span", "sms-meta",
                     `${message.segments} seg · ${message.at}`));
      list.append(item);
    }
  }
}

// -- staff console pane ---------------------------------------------------------

export class ConsolePane {
  private session: ConsoleSession;
  private active: Section | null = null;

  constructor(private api: ApiClient) {
    this.session = new ConsoleSession(api);
  }

  mount(): void {
    must("btn-login").onclick = () => void this.login();
    must("btn-logout").onclick = () => {
      this.session.logout();
      this.active = null;
      this.renderChrome();
    };
    window.setInterval(() => {
      if (this.active === "questions") void this.showSection("questions");
      if (this.active === "dashboard") void this.showSection("dashboard");
    }, POLL_MS);
    this.renderChrome();
  }

  private async login(): Promise<void> {
    const username = (must("login-user") as HTMLInputElement).value.trim();
    const password = (must("login-pass") as HTMLInputElement).value;
    const errorBox = must("login-error");
    try {
      await this.session.login(username, password);
      errorBox.textContent = "";
      this.renderChrome();
      const first = this.session.visibleSections()[0];
      if (first) await this.showSection(first);
    } catch (error) {
      errorBox.textContent = error instanceof ApiRequestError
        ? `${error.code}: ${error.message}` : String(error);
    }
  }

  private renderChrome(): void {
    must("login-form").classList.toggle("hidden", this.session.loggedIn);
    must("console-main").classList.toggle("hidden", !this.session.loggedIn);
    must("console-user").textContent = this.session.loggedIn
      ? `${this.session.profile?.display_name} (${this.session.role})` : "";
    const nav = must("console-nav");
    nav.replaceChildren();
    for (const section of this.session.visibleSections()) {
      const button = el("button", section === this.active ? "active" : "",
                        section);
      button.onclick = () => void this.showSection(section);
      nav.append(button);
    }
  }

  private async showSection(section: Section): Promise<void> {
    if (!this.session.canSee(section)) return;
    this.active = section;
    this.renderChrome();
    const body = must("console-body");
    try {
      body.replaceChildren(await this.sectionContent(section));
    } catch (error) {
      body.replaceChildren(
        el("p", "error", error instanceof ApiRequestError
          ? `${error.code}: ${error.message}` : String(error)));
    }
  }

  private async sectionContent(section: Section): Promise<HTMLElement> {
    switch (section) {
      case "dashboard": return this.dashboardCard();
      case "sponsors": return this.sponsorTable();
      case "questions": return this.questionList();
      case "ads": return this.adsTable();
      case "categories": return this.categoryTable();
      case "subscribers": return this.subscriberTable();
      case "content": return this.contentForm();
    }
  }

  private async dashboardCard(): Promise<HTMLElement> {
    const data = await this.session.dashboard();
    const card = el("div", "card");
    const stats = el("div", "stats");
    for (const [label, value] of [
      ["subscribers", data.subscribers],
      ["open questions", data.open_questions],
      ["impressions", data.impressions],
      ["sms cost (Tsh)", data.sms_cost],
    ] as const) {
      const cell = el("div", "stat");
      cell.append(el("strong", "", String(value)), el("span", "", label));
      stats.append(cell);
    }
    card.append(el("h2", "", "Dashboard"), stats, el("h3", "", "Sponsors"));
    const table = el("table");
    table.append(headerRow(["name", "balance", "impressions", "spend"]));
    for (const sponsor of data.sponsors) {
      table.append(dataRow([sponsor.name, String(sponsor.balance),
                            String(sponsor.impressions), String(sponsor.spend)]));
    }
    card.append(table);
    return card;
  }

  private async sponsorTable(): Promise<HTMLElement> {
    const sponsors = await this.session.sponsors();
    const card = el("div", "card");
    card.append(el("h2", "", "Sponsors"));
    const table = el("table");
    table.append(headerRow(["id", "name", "balance", "top up"]));
    for (const sponsor of sponsors) {
      table.append(this.sponsorRow(sponsor));
    }
    card.append(table);
    return card;
  }

  private sponsorRow(sponsor: Sponsor): HTMLTableRowElement {
    const row = dataRow([String(sponsor.id), sponsor.name,
                         String(sponsor.balance)]);
    const cell = el("td");
    const amount = el("input") as HTMLInputElement;
    amount.type = "number";
    amount.value = "100";
    const button = el("button", "", "deposit");
    button.onclick = async () => {
      const balance = await this.session.topUpSponsor(
        sponsor.id, Number(amount.value));
      // re-render from the backend figure, never from local arithmetic
      (row.children[2] as HTMLElement).textContent = String(balance);
    };
    cell.append(amount, button);
    row.append(cell);
    return row;
  }

  private async questionList(): Promise<HTMLElement> {
    const open = await this.session.questions("Open");
    const answered = await this.session.questions("Answered");
    const card = el("div", "card");
    card.append(el("h2", "", `Open questions (${open.length})`));
    const list = el("ul", "questions");
    for (const question of open) {
      list.append(this.questionRow(question));
    }
    card.append(list, el("h2", "", `Answered (${answered.length})`));
    const done = el("ul", "questions answered");
    for (const question of answered) {
      const item = el("li");
      item.append(el("span", "q-msisdn", question.msisdn),
                  el("p", "", question.text));
      done.append(item);
    }
    card.append(done);
    return card;
  }

  private questionRow(question: Question): HTMLLIElement {
    const item = el("li");
    const answer = el("input") as HTMLInputElement;
    answer.placeholder = "type the answer";
    const button = el("button", "", "send answer");
    button.onclick = async () => {
      if (!answer.value.trim()) return;
      await this.session.answerQuestion(question.id, answer.value.trim());
      await this.showSection("questions");
    };
    item.append(el("span", "q-msisdn", question.msisdn),
                el("p", "", question.text), answer, button);
    return item;
  }

  private async adsTable(): Promise<HTMLElement> {
    const ads = await this.api.ads();
    const card = el("div", "card");
    card.append(el("h2", "", "Ads"));
    const table = el("table");
    table.append(headerRow(["id", "sponsor", "body", "active"]));
    for (const ad of ads) {
      table.append(dataRow([String(ad.id), String(ad.sponsor_id), ad.body_sw,
                            ad.active ? "yes" : "no"]));
    }
    card.append(table);
    return card;
  }

  private async categoryTable(): Promise<HTMLElement> {
    const categories = await this.api.categories();
    const card = el("div", "card");
    card.append(el("h2", "", "Categories"));
    const table = el("table");
    table.append(headerRow(["id", "name", "parent", "position", "active"]));
    for (const category of categories) {
      table.append(dataRow([String(category.id), category.name_sw,
                            category.parent_id === null ? "—" : String(category.parent_id),
                            String(category.position),
                            category.active ? "yes" : "no"]));
    }
    card.append(table);
    return card;
  }

  private async subscriberTable(): Promise<HTMLElement> {
    const subscribers = await this.api.subscribers();
    const card = el("div", "card");
    card.append(el("h2", "", "Subscribers"));
    const table = el("table");
    table.append(headerRow(["msisdn", "status", "consent", "registered"]));
    for (const row of subscribers) {
      table.append(dataRow([row.msisdn, row.status,
                            row.consent_ads ? "yes" : "no", row.registered_at]));
    }
    card.append(table);
    return card;
  }

  private async contentForm(): Promise<HTMLElement> {
    const items = await this.api.content();
    const card = el("div", "card");
    card.append(el("h2", "", "Content"));
    const table = el("table");
    table.append(headerRow(["id", "category", "body"]));
    for (const item of items) {
      table.append(dataRow([String(item.id), String(item.category_id),
                            item.body_sw]));
    }
    const category = el("input") as HTMLInputElement;
    category.placeholder = "leaf category id";
    const body = el("textarea") as HTMLTextAreaElement;
    body.placeholder = "Swahili content body";
    const note = el("p", "warnings");
    const button = el("button", "", "add content");
    button.onclick = async () => {
      const created = await this.api.createContent(Number(category.value),
                                                   body.value.trim());
      note.textContent = created.warnings?.length
        ? `saved with warning: ${created.warnings.join("; ")}` : "saved";
      await this.showSection("content");
    };
    card.append(table, el("h3", "", "New item"), category, body, button, note);
    return card;
  }
}

function headerRow(labels: string[]): HTMLTableRowElement {
  const row = el("tr");
  for (const label of labels) row.append(el("th", "", label));
  return row;
}

function dataRow(cells: string[]): HTMLTableRowElement {
  const row = el("tr");
  for (const cell of cells) row.append(el("td", "", cell));
  return row;
}
