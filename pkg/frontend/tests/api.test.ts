import { describe, expect, it } from "vitest";

import { ApiClient, ApiRequestError } from "../src/api";
import { FakeBackend } from "./fakeBackend";

describe("api client", () => {
  it("attaches the bearer token once set", async () => {
    const backend = new FakeBackend();
    const api = new ApiClient("", backend.fetch);
    const login = await api.login("admin", "admin123");
    api.setToken(login.token);
    await api.sponsors();
    const last = backend.requests.at(-1)!;
    expect(last.path).toBe("/api/v1/sponsors");
    // the fake resolved the role, so the header made it through
    expect(backend.tokens.get(login.token)).toBe("Administrator");
  });

  it("turns the error envelope into a typed error", async () => {
    const backend = new FakeBackend();
    const api = new ApiClient("", backend.fetch);
    try {
      await api.sponsors(); // no token
      expect.unreachable();
    } catch (error) {
      const typed = error as ApiRequestError;
      expect(typed).toBeInstanceOf(ApiRequestError);
      expect(typed.status).toBe(401);
      expect(typed.code).toBe("BadCredentials");
      expect(typed.message).toContain("token");
    }
  });

  it("unwraps the inbox envelope", async () => {
    const backend = new FakeBackend();
    backend.pushSms("255712000001", "System", "Karibu!");
    const api = new ApiClient("", backend.fetch);
    const messages = await api.inbox("255712000001");
    expect(messages).toHaveLength(1);
    expect(messages[0].body).toBe("Karibu!");
  });
});
