import { vi } from "vitest";

export interface RecordedRequest {
  method: string;
  path: string;
  headers: Record<string, string>;
  body: unknown;
}

/** Install a fetch mock that routes "METHOD /path" to canned responses and
 * records every request.  Handlers may be objects (returned as JSON) or
 * functions of the recorded request. */
export function mockFetch(
  routes: Record<string, unknown | ((req: RecordedRequest) => unknown)>,
): { requests: RecordedRequest[] } {
  const requests: RecordedRequest[] = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: string, init?: RequestInit) => {
      const method = init?.method ?? "GET";
      const path = url.replace(/^https?:\/\/[^/]+/, "");
      const req: RecordedRequest = {
        method,
        path,
        headers: (init?.headers as Record<string, string>) ?? {},
        body: init?.body ? JSON.parse(init.body as string) : undefined,
      };
      requests.push(req);
      const key = `${method} ${path.split("?")[0]}`;
      const handler = routes[key] ?? routes[`${method} *`];
      if (handler === undefined) {
        return new Response(
          JSON.stringify({ code: "NoSuchRoute", message: key, status: 404 }),
          { status: 404 },
        );
      }
      const value = typeof handler === "function" ? (handler as (r: RecordedRequest) => unknown)(req) : handler;
      if (value instanceof Response) return value;
      return new Response(JSON.stringify(value), {
        status: 200,
        headers: { "Content-Type": "application/json" },
      });
    }),
  );
  return { requests };
}

export function errorResponse(code: string, status: number): Response {
  return new Response(
    JSON.stringify({ code, message: `${code} happened`, status }),
    { status },
  );
}
