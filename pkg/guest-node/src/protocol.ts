/**
 * Length-prefixed JSON frame codec (wire protocol version 1).
 *
 * Every frame on the wire is a u32 big-endian byte count followed by that
 * many bytes of UTF-8 JSON: `{"type": ..., "seq": ..., "payload": {...}}`.
 * The full contract lives in ../PROTOCOL.md; this module must stay in
 * agreement with the Python host codec and the reference Python guest.
 */

export const PROTOCOL_VERSION = 1;

/** Frames never exceed 64 MiB of body; a larger prefix means the stream is corrupt. */
export const MAX_FRAME_BYTES = 64 * 1024 * 1024;

const PREFIX_BYTES = 4;

export interface Frame {
  type: string;
  seq: number;
  payload: Record<string, unknown>;
}

/**
 * Serialize one frame, length prefix included, ready for a single write.
 *
 * Writing the returned buffer in one call is what keeps frames from
 * interleaving when several sources share a stream.
 */
export function encodeFrame(type: string, seq: number, payload: Record<string, unknown>): Buffer {
  const body = Buffer.from(JSON.stringify({ type, seq, payload }), 'utf8');
  if (body.length > MAX_FRAME_BYTES) {
    throw new RangeError(`frame body is ${body.length} bytes; the protocol caps frames at ${MAX_FRAME_BYTES}`);
  }
  const prefix = Buffer.allocUnsafe(PREFIX_BYTES);
  prefix.writeUInt32BE(body.length, 0);
  return Buffer.concat([prefix, body]);
}

/**
 * Decode one frame body into its three mandatory fields.
 *
 * Throws on anything that is not a JSON object with a string `type` and a
 * non-negative integer `seq`; a missing or null `payload` becomes `{}` so
 * callers never branch on its presence.
 */
export function parseFrame(body: Buffer): Frame {
  let raw: unknown;
  try {
    raw = JSON.parse(body.toString('utf8'));
  } catch (err) {
    throw new Error(`frame body is not valid JSON: ${err instanceof Error ? err.message : String(err)}`);
  }
  if (typeof raw !== 'object' || raw === null || Array.isArray(raw)) {
    throw new Error('frame is not an object');
  }
  const frame = raw as { type?: unknown; seq?: unknown; payload?: unknown };
  if (typeof frame.type !== 'string') {
    throw new Error('frame has no string "type"');
  }
  if (typeof frame.seq !== 'number' || !Number.isInteger(frame.seq) || frame.seq < 0) {
    throw new Error('frame has no non-negative integer "seq"');
  }
  const payload = frame.payload;
  if (payload !== undefined && payload !== null && (typeof payload !== 'object' || Array.isArray(payload))) {
    throw new Error('frame "payload" is not an object');
  }
  return {
    type: frame.type,
    seq: frame.seq,
    payload: (payload as Record<string, unknown> | undefined | null) ?? {},
  };
}

/**
 * Incremental reader for the framed stream.
 *
 * Feed it raw chunks in arrival order; it hands back every complete frame
 * body as soon as the bytes for one are in. Bytes of a partial frame stay
 * buffered until the rest shows up, so chunk boundaries never matter.
 */
export class FrameDecoder {
  private buffered: Buffer = Buffer.alloc(0);

  /** Consume a chunk from the wire and return the frame bodies it completed. */
  push(chunk: Buffer): Buffer[] {
    this.buffered = this.buffered.length === 0 ? chunk : Buffer.concat([this.buffered, chunk]);
    const bodies: Buffer[] = [];
    while (this.buffered.length >= PREFIX_BYTES) {
      const length = this.buffered.readUInt32BE(0);
      if (length > MAX_FRAME_BYTES) {
        throw new RangeError(`frame prefix claims ${length} bytes; the protocol caps frames at ${MAX_FRAME_BYTES}`);
      }
      if (this.buffered.length < PREFIX_BYTES + length) {
        break;
      }
      bodies.push(this.buffered.subarray(PREFIX_BYTES, PREFIX_BYTES + length));
      this.buffered = this.buffered.subarray(PREFIX_BYTES + length);
    }
    return bodies;
  }

  /**
   * Bytes still waiting for the rest of their frame. Zero when the stream
   * sits between frames, which is the only place EOF is legal.
   */
  get pendingBytes(): number {
    return this.buffered.length;
  }
}
