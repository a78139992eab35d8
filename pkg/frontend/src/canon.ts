// Canonical serialization primitives. The server hashes scenes over a
// normalized JSON text (sorted keys, floats rounded to 1e-6 and rendered in
// Python's shortest-repr style, ASCII-escaped strings, FNV-1a 64). The board
// must reproduce those bytes exactly or mirror verification is meaningless,
// so every rule here is deliberate.

/** Marker for a number that is already rendered to its final text. */
export class Raw {
  constructor(public readonly text: string) {}
}

export type CanonNode =
  | Raw
  | string
  | null
  | CanonNode[]
  | { [key: string]: CanonNode };

/** Decimal round-half-even at 6 places, matching Python's round(x, 6). */
export function round6(x: number): number {
  if (!Number.isFinite(x)) {
    throw new Error(`cannot canonicalize non-finite ${x}`);
  }
  if (x === 0) return 0;
  const neg = x < 0;
  const ax = Math.abs(x);
  if (ax >= 1e15) return x; // ulp already dwarfs 1e-6; rounding is identity
  const buf = new DataView(new ArrayBuffer(8));
  buf.setFloat64(0, ax);
  const bits = buf.getBigUint64(0);
  const expBits = Number((bits >> 52n) & 0x7ffn);
  const mantBits = bits & 0xfffffffffffffn;
  const mant = expBits === 0 ? mantBits : mantBits | (1n << 52n);
  const exp = (expBits === 0 ? -1074 : expBits - 1075);
  // exact value is mant * 2^exp; scale by 10^6 and divide half-even
  let num = mant * 1000000n;
  let den = 1n;
  if (exp >= 0) {
    num <<= BigInt(exp);
  } else {
    den = 1n << BigInt(-exp);
  }
  let q = num / den;
  const r = num % den;
  const twice = r * 2n;
  if (twice > den || (twice === den && (q & 1n) === 1n)) {
    q += 1n;
  }
  const v = Number(q) / 1e6;
  return neg ? -v : v;
}

/** Render a float exactly the way Python's repr does for our value domain. */
export function pyFloatRepr(x: number): string {
  if (x === 0) return "0.0"; // covers -0.0 as well
  if (Number.isInteger(x) && Math.abs(x) < 1e16) {
    return x.toFixed(0) + ".0";
  }
  const a = Math.abs(x);
  if (a >= 1e16 || a < 1e-4) {
    const [mant, exp] = x.toExponential().split("e");
    const expNum = parseInt(exp, 10);
    const sign = expNum < 0 ? "-" : "+";
    const digits = Math.abs(expNum).toString().padStart(2, "0");
    return `${mant}e${sign}${digits}`;
  }
  return String(x);
}

export function cfloat(x: number): Raw {
  const v = round6(x);
  return new Raw(pyFloatRepr(v === 0 ? 0 : v));
}

export function cint(x: number): Raw {
  if (!Number.isInteger(x)) {
    throw new Error(`expected an integer, got ${x}`);
  }
  return new Raw(String(x));
}

/** json.dumps-style string escaping with ensure_ascii=True. */
export function escapeString(s: string): string {
  let out = '"';
  for (const ch of s) {
    const cp = ch.codePointAt(0)!;
    if (ch === '"') out += '\\"';
    else if (ch === "\\") out += "\\\\";
    else if (ch === "\b") out += "\\b";
    else if (ch === "\f") out += "\\f";
    else if (ch === "\n") out += "\\n";
    else if (ch === "\r") out += "\\r";
    else if (ch === "\t") out += "\\t";
    else if (cp < 0x20 || cp > 0x7e) {
      if (cp > 0xffff) {
        const high = 0xd800 + ((cp - 0x10000) >> 10);
        const low = 0xdc00 + ((cp - 0x10000) & 0x3ff);
        out += "\\u" + high.toString(16).padStart(4, "0");
        out += "\\u" + low.toString(16).padStart(4, "0");
      } else {
        out += "\\u" + cp.toString(16).padStart(4, "0");
      }
    } else {
      out += ch;
    }
  }
  return out + '"';
}

/** Compact JSON text with lexicographically sorted keys. */
export function serializeCanon(node: CanonNode): string {
  if (node instanceof Raw) return node.text;
  if (node === null) return "null";
  if (typeof node === "string") return escapeString(node);
  if (Array.isArray(node)) {
    return "[" + node.map(serializeCanon).join(",") + "]";
  }
  const keys = Object.keys(node).sort();
  const parts = keys.map((k) => `${escapeString(k)}:${serializeCanon(node[k])}`);
  return "{" + parts.join(",") + "}";
}

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(data: Uint8Array): string {
  let h = FNV_OFFSET;
  for (const byte of data) {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h.toString(16).padStart(16, "0");
}

export function fnv1a64Text(text: string): string {
  return fnv1a64(new TextEncoder().encode(text));
}
