// Thin fetch wrappers around the session service.

import type { CommandResponse, StatePayload } from "./types.js";

export class SessionApi {
  constructor(private host: string, private sessionId: number) {}

  get id(): number {
    return this.sessionId;
  }

  static async create(host: string, body: Record<string, unknown>): Promise<SessionApi> {
    const r = await fetch(`${host}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!r.ok) throw new Error(`create session failed: ${r.status} ${await r.text()}`);
    const data = await r.json();
    return new SessionApi(host, data.id);
  }

  async state(): Promise<StatePayload> {
    const r = await fetch(`${this.host}/sessions/${this.sessionId}/state`);
    if (!r.ok) throw new Error(`state failed: ${r.status}`);
    return r.json();
  }

  async command(text: string): Promise<CommandResponse> {
    const r = await fetch(`${this.host}/sessions/${this.sessionId}/command`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (!r.ok) throw new Error(`command rejected: ${r.status} ${await r.text()}`);
    return r.json();
  }

  async tick(dt: number): Promise<void> {
    await fetch(`${this.host}/sessions/${this.sessionId}/tick`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dt }),
    });
  }

  async reset(): Promise<void> {
    await fetch(`${this.host}/sessions/${this.sessionId}/reset`, { method: "POST" });
  }
}
