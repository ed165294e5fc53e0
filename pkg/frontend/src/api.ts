import type { GroundResponse, ModelInfo } from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin client for the grounding service; `fetchImpl` is injectable for tests. */
export class ServiceClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async listModels(): Promise<ModelInfo[]> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/models`);
    if (!resp.ok) {
      throw new Error(`model listing failed: HTTP ${resp.status}`);
    }
    return (await resp.json()) as ModelInfo[];
  }

  async ground(image: Blob, text: string, modelId: string): Promise<GroundResponse> {
    const form = new FormData();
    form.append("image", image, "image.png");
    form.append("text", text);
    form.append("model_id", modelId);
    const resp = await this.fetchImpl(`${this.baseUrl}/api/ground`, {
      method: "POST",
      body: form,
    });
    if (!resp.ok) {
      let message = `HTTP ${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: { field?: string; message?: string } };
        if (body.error) {
          message = `${message}: ${body.error.field ?? ""} ${body.error.message ?? ""}`.trim();
        }
      } catch {
        // keep the bare status message
      }
      throw new Error(message);
    }
    return (await resp.json()) as GroundResponse;
  }
}
