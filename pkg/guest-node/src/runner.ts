/**
 * Guest cell runner: one persistent JavaScript namespace, length-prefixed
 * JSON frames over stdio. Node twin of the reference Python guest; the frame
 * traffic on both is described in ../PROTOCOL.md.
 *
 * Each guest executes cells in its own language — here the `source` of an
 * `exec` frame is JavaScript, run inside a single vm context that lives for
 * the whole process, so names bound by cell N are visible to cell N+1.
 */
import * as vm from 'node:vm';
import { format, inspect } from 'node:util';
import { encodeFrame, parseFrame, FrameDecoder, PROTOCOL_VERSION } from './protocol';

/** Output chunks ship when a newline appears or this many bytes accumulate. */
const FLUSH_BYTES = 8192;

type FrameSink = (type: string, seq: number, payload: Record<string, unknown>) => void;

/**
 * Stand-in for one of the cell's standard streams; ships chunks as frames.
 *
 * Mirrors the flush rule of the reference guest: buffer until the written
 * text carries a newline or 8 KiB piles up, and always drain before the
 * cell's status frame so output can never trail its own completion.
 */
class OutputChannel {
  private buffer = '';

  constructor(
    private readonly frameType: 'out' | 'err',
    private readonly send: FrameSink,
    private readonly runner: Runner,
  ) {}

  write(text: string): void {
    this.buffer += text;
    if (text.includes('\n') || Buffer.byteLength(this.buffer, 'utf8') >= FLUSH_BYTES) {
      this.flush();
    }
  }

  flush(): void {
    if (this.buffer.length === 0) {
      return;
    }
    const chunk = this.buffer;
    this.buffer = '';
    this.runner.cellOutputBytes += Buffer.byteLength(chunk, 'utf8');
    this.send(this.frameType, this.runner.cellSeq, { text: chunk });
  }
}

export class Runner {
  cellSeq = 0;
  cellOutputBytes = 0;

  private readonly decoder = new FrameDecoder();
  private readonly stdout: OutputChannel;
  private readonly stderr: OutputChannel;
  private readonly context: vm.Context;

  constructor(
    private readonly input: NodeJS.ReadableStream = process.stdin,
    private readonly output: NodeJS.WritableStream = process.stdout,
  ) {
    const send: FrameSink = (type, seq, payload) => this.sendFrame(type, seq, payload);
    this.stdout = new OutputChannel('out', send, this);
    this.stderr = new OutputChannel('err', send, this);
    this.context = vm.createContext(this.makeSandbox());
  }

  /**
   * The globals every cell starts from. Deliberately small: a console and a
   * two-stream process stub are the cell's only way to produce output, and
   * both feed the frame channel. The runner's real `process` stays out of
   * reach so a stray `process.exit()` in a cell cannot take the guest down.
   */
  private makeSandbox(): Record<string, unknown> {
    const toOut = (...args: unknown[]) => this.stdout.write(format(...args) + '\n');
    const toErr = (...args: unknown[]) => this.stderr.write(format(...args) + '\n');
    return {
      console: { log: toOut, info: toOut, debug: toOut, warn: toErr, error: toErr },
      process: {
        pid: process.pid,
        stdout: { write: (text: unknown) => (this.stdout.write(String(text)), true) },
        stderr: { write: (text: unknown) => (this.stderr.write(String(text)), true) },
      },
    };
  }

  /** Write one complete frame in a single call so frames never interleave. */
  private sendFrame(type: string, seq: number, payload: Record<string, unknown>): void {
    this.output.write(encodeFrame(type, seq, payload));
  }

  /** Run one cell and answer with exactly one status frame. */
  private runCell(seq: number, source: string): void {
    this.cellSeq = seq;
    this.cellOutputBytes = 0;
    let outcome: 'ok' | 'exception' = 'ok';
    let error: string | null = null;
    const started = performance.now();
    try {
      // breakOnSigint lets the host's SIGINT stop a compute-bound cell; the
      // throw below carries code ERR_SCRIPT_EXECUTION_INTERRUPTED. Node
      // suspends our idle SIGINT listener for the duration and restores it
      // afterwards, which is exactly the split the protocol asks for.
      vm.runInContext(source, this.context, { filename: `<cell-${seq}>`, breakOnSigint: true });
    } catch (err) {
      outcome = 'exception';
      error = isInterrupt(err) ? 'interrupted' : formatError(err);
    }
    const wallMs = Math.round(performance.now() - started);
    this.stdout.flush();
    this.stderr.flush();
    this.sendFrame('status', seq, {
      outcome,
      error,
      total_output_bytes: this.cellOutputBytes,
      wall_ms: wallMs,
    });
  }

  /** Dispatch one decoded frame body; never let a bad frame end the loop. */
  private handleBody(body: Buffer): void {
    let frame;
    try {
      frame = parseFrame(body);
    } catch (err) {
      this.sendFrame('status', 0, {
        outcome: 'exception',
        error: `protocol-error: ${err instanceof Error ? err.message : String(err)}`,
        protocol_error: true,
        total_output_bytes: 0,
        wall_ms: 0,
      });
      return;
    }
    if (frame.type === 'exec') {
      this.runCell(frame.seq, String(frame.payload.source ?? ''));
    } else if (frame.type === 'interrupt') {
      // Cells run synchronously on this thread, so any interrupt frame is
      // only read after its target cell already ended: stale, drop it. The
      // SIGINT the host sends alongside is what lands mid-cell.
    } else {
      this.sendFrame('status', frame.seq, {
        outcome: 'exception',
        error: `protocol-error: unexpected frame type ${JSON.stringify(frame.type)}`,
        protocol_error: true,
        total_output_bytes: 0,
        wall_ms: 0,
      });
    }
  }

  /** Read frames until stdin closes; that close is the shutdown request. */
  serve(): void {
    // A SIGINT between cells must not kill the guest; this listener absorbs
    // it (and is suspended by breakOnSigint while a cell runs).
    process.on('SIGINT', () => {});

    this.sendFrame('handshake', 0, {
      protocol: PROTOCOL_VERSION,
      runtime: 'node',
      pid: process.pid,
    });

    this.input.on('data', (chunk: Buffer) => {
      let bodies: Buffer[];
      try {
        bodies = this.decoder.push(chunk);
      } catch {
        // A prefix above the frame cap means the stream is corrupt and
        // framing is lost for good; the only safe move is to stop.
        process.exit(1);
      }
      for (const body of bodies) {
        this.handleBody(body);
      }
    });
    this.input.on('end', () => {
      // Clean EOF between frames is a normal close; mid-frame it is an error.
      process.exit(this.decoder.pendingBytes === 0 ? 0 : 1);
    });
    this.input.on('error', () => process.exit(1));
  }
}

/** True when vm aborted the cell because the host delivered SIGINT. */
function isInterrupt(err: unknown): boolean {
  return (
    typeof err === 'object' &&
    err !== null &&
    (err as { code?: unknown }).code === 'ERR_SCRIPT_EXECUTION_INTERRUPTED'
  );
}

/** Render a thrown value the way a terminal would, stack first when there is one. */
function formatError(err: unknown): string {
  if (err instanceof Error) {
    return err.stack ?? `${err.name}: ${err.message}`;
  }
  return `Uncaught ${inspect(err)}`;
}

if (require.main === module) {
  new Runner().serve();
}
