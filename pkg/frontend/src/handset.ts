import { ApiClient } from "./api";
import type { InboxMessage } from "./types";

export interface HandsetState {
  msisdn: string;
  /** Exactly the latest wire reply text; the handset never reformats it. */
  dialogText: string | null;
  /** Continue keeps the input open; End closes the dialog. */
  dialogOpen: boolean;
  inbox: InboxMessage[];
  /** Network-failure notice; the last action can simply be retried. */
  banner: string | null;
  lastRouting: string | null;
}

/** Phone-side model: dials USSD codes, steers the live session, reads SMS. */
export class Handset {
  readonly state: HandsetState;
  private session: string | null = null;

  constructor(
    private api: ApiClient,
    msisdn: string,
    private onChange: () => void = () => {},
  ) {
    this.state = {
      msisdn,
      dialogText: null,
      dialogOpen: false,
      inbox: [],
      banner: null,
      lastRouting: null,
    };
  }

  setMsisdn(msisdn: string): void {
    this.state.msisdn = msisdn;
    this.state.dialogText = null;
    this.state.dialogOpen = false;
    this.state.inbox = [];
    this.session = null;
    this.onChange();
  }

  async dial(code: string): Promise<void> {
    await this.exchange(code, null);
  }

  /** Menu input into the open session. */
  async send(input: string): Promise<void> {
    await this.exchange(input, this.session);
  }

  async sendSms(shortcode: string, text: string): Promise<void> {
    try {
      const routing = await this.api.simSms(this.state.msisdn, shortcode, text);
      this.state.lastRouting = routing.routed_as;
      this.state.banner = null;
      await this.refreshInbox();
    } catch (error) {
      this.networkTrouble(error);
    }
    this.onChange();
  }

  async refreshInbox(): Promise<void> {
    try {
      this.state.inbox = await this.api.inbox(this.state.msisdn);
    } catch (error) {
      this.networkTrouble(error);
    }
    this.onChange();
  }

  closeDialog(): void {
    this.state.dialogOpen = false;
    this.state.dialogText = null;
    this.session = null;
    this.onChange();
  }

  private async exchange(text: string, session: string | null): Promise<void> {
    try {
      const reply = await this.api.simUssd(this.state.msisdn, session, text);
      this.state.dialogText = reply.reply;
      this.state.dialogOpen = reply.continue;
      this.session = reply.continue ? reply.session : null;
      this.state.banner = null;
      if (!reply.continue) {
        // the session is over; whatever it produced is in the inbox now
        await this.refreshInbox();
      }
    } catch (error) {
      this.networkTrouble(error);
    }
    this.onChange();
  }

  private networkTrouble(error: unknown): void {
    this.state.banner = `Mtandao haupatikani, jaribu tena. (${String(error)})`;
  }
}
