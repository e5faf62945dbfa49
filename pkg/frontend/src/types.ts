// Wire types for /sim/* and /api/v1/*. The console renders what the
// backend returns and never derives balances or counts on its own.

export interface UssdReply {
  reply: string;
  continue: boolean;
  session: string;
}

export interface SmsRouting {
  status: string;
  routed_as: string;
}

export interface InboxMessage {
  id: number;
  kind: string;
  body: string;
  segments: number;
  at: string;
}

export interface LoginResponse {
  token: string;
  expires_at: number;
  username: string;
  display_name: string;
  group: string;
  permissions: string[];
}

export interface Sponsor {
  id: number;
  name: string;
  contact: string;
  balance: number;
  active: boolean;
}

export interface Ad {
  id: number;
  sponsor_id: number;
  body_sw: string;
  active: boolean;
}

export interface Category {
  id: number;
  name_sw: string;
  parent_id: number | null;
  position: number;
  active: boolean;
}

export interface ContentItem {
  id: number;
  category_id: number;
  body_sw: string;
  warnings?: string[];
}

export interface Question {
  id: number;
  msisdn: string;
  text: string;
  status: "Open" | "Answered";
  received_at: string;
}

export interface SubscriberRow {
  id: number;
  msisdn: string;
  status: string;
  consent_ads: boolean;
  registered_at: string;
}

export interface DashboardData {
  subscribers: number;
  open_questions: number;
  sponsors: Array<{
    id: number;
    name: string;
    balance: number;
    impressions: number;
    spend: number;
  }>;
  impressions: number;
  sms_cost: number;
}

export interface ApiError {
  error: string;
  detail: string;
}
