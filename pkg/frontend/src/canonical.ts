/**
 * Canonical JSON bytes, matching the desk service exactly: keys sorted by
 * code point, minimal separators, UTF-8, non-ASCII left unescaped. Floats
 * are rejected because their text form is not canonical.
 */

export type JsonValue =
  | null
  | boolean
  | number
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

const encoder = new TextEncoder();

function codePointCompare(a: string, b: string): number {
  // String < on UTF-16 units misorders astral-plane characters; compare
  // code points so ordering agrees with UTF-8 bytewise order.
  const pa = Array.from(a);
  const pb = Array.from(b);
  const n = Math.min(pa.length, pb.length);
  for (let i = 0; i < n; i++) {
    const ca = pa[i]!.codePointAt(0)!;
    const cb = pb[i]!.codePointAt(0)!;
    if (ca !== cb) return ca - cb;
  }
  return pa.length - pb.length;
}

function serialize(value: JsonValue, path: string): string {
  if (value === null) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") {
    if (!Number.isInteger(value)) {
      throw new Error(`non-integer number at ${path}; canonical form is undefined`);
    }
    if (Math.abs(value) > Number.MAX_SAFE_INTEGER) {
      throw new Error(`integer out of safe range at ${path}`);
    }
    return String(value);
  }
  if (typeof value === "string") return JSON.stringify(value);
  if (Array.isArray(value)) {
    return "[" + value.map((v, i) => serialize(v, `${path}[${i}]`)).join(",") + "]";
  }
  if (typeof value === "object") {
    const keys = Object.keys(value).sort(codePointCompare);
    const parts = keys.map(
      (k) => JSON.stringify(k) + ":" + serialize(value[k]!, `${path}.${k}`)
    );
    return "{" + parts.join(",") + "}";
  }
  throw new Error(`unsupported value of type ${typeof value} at ${path}`);
}

export function canonicalJsonString(value: JsonValue): string {
  return serialize(value, "$");
}

export function canonicalJsonBytes(value: JsonValue): Uint8Array {
  return encoder.encode(canonicalJsonString(value));
}
