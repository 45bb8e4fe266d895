/** Shared fakes for the UI tests: captured requests and an async settle loop. */

export interface CapturedRequest {
  method: string;
  path: string;
  headers: Record<string, string>;
  body: string | null;
}

export function jsonResponse(payload: unknown, status = 200): Response {
  // Only the members DeskClient touches; a full Response is not needed.
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: "",
    json: async () => payload,
  } as unknown as Response;
}

export function capture(
  store: CapturedRequest[],
  input: string,
  init?: RequestInit
): CapturedRequest {
  const url = new URL(input);
  const entry: CapturedRequest = {
    method: init?.method ?? "GET",
    path: url.pathname,
    headers: { ...((init?.headers ?? {}) as Record<string, string>) },
    body: typeof init?.body === "string" ? init.body : null,
  };
  store.push(entry);
  return entry;
}

/** Poll until the condition holds; throws if it never does. */
export async function until(condition: () => boolean, timeoutMs = 2000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!condition()) {
    if (Date.now() > deadline) throw new Error("condition never became true");
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

/** Let queued microtasks and timer callbacks run. */
export async function settle(turns = 4): Promise<void> {
  for (let i = 0; i < turns; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}
