/** Typed wrappers over the JSON API. */

import { errorMessage, Hit, Method } from "./state";

export interface QueryResponse {
  hits: Hit[];
  method: Method;
  elapsed_ms: number;
}

export interface EncodeResponse {
  codes: number[];
  depth: number;
  label: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function post<T>(path: string, payload: unknown): Promise<T> {
  let response: Response;
  try {
    response = await fetch(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  } catch {
    throw new ApiError(0, "network error: could not reach the service");
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error bodies fall through to the status-based message
  }
  if (!response.ok) {
    throw new ApiError(response.status, errorMessage(response.status, body));
  }
  return body as T;
}

export function queryApi(
  latex: string,
  k: number,
  method: Method,
  excludeSelf: boolean,
): Promise<QueryResponse> {
  return post<QueryResponse>("/api/query", {
    latex,
    k,
    method,
    exclude_self: excludeSelf,
  });
}

export function encodeApi(latex: string): Promise<EncodeResponse> {
  return post<EncodeResponse>("/api/encode", { latex });
}
