// Newline-delimited JSON client for the environment protocol over TCP.
// The server answers strictly one reply per request, so a FIFO of pending
// resolvers is all the correlation we need.

import * as net from 'node:net';
import type { EpisodeEndMessage, HelloMessage, ObsMessage, ServerMessage } from './types.js';

export class ProtocolError extends Error {}

export class EnvClient {
  private socket: net.Socket | null = null;
  private buffer = '';
  private pending: {
    resolve: (msg: ServerMessage) => void;
    reject: (err: Error) => void;
  }[] = [];

  async connect(host: string, port: number, timeoutMs = 5000): Promise<void> {
    await new Promise<void>((resolve, reject) => {
      const socket = net.createConnection({ host, port });
      const timer = setTimeout(() => {
        socket.destroy();
        reject(new Error(`connect timeout to ${host}:${port}`));
      }, timeoutMs);
      socket.once('connect', () => {
        clearTimeout(timer);
        this.socket = socket;
        socket.setEncoding('utf-8');
        socket.on('data', (chunk: string) => this.onData(chunk));
        socket.on('error', (err) => this.failAll(err));
        socket.on('close', () => this.failAll(new Error('connection closed')));
        resolve();
      });
      socket.once('error', (err) => {
        clearTimeout(timer);
        reject(err);
      });
    });
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let idx: number;
    while ((idx = this.buffer.indexOf('\n')) >= 0) {
      const line = this.buffer.slice(0, idx).trim();
      this.buffer = this.buffer.slice(idx + 1);
      if (!line) continue;
      const waiter = this.pending.shift();
      if (!waiter) continue; // unsolicited line; protocol is request/response
      try {
        waiter.resolve(JSON.parse(line) as ServerMessage);
      } catch (err) {
        waiter.reject(err instanceof Error ? err : new Error(String(err)));
      }
    }
  }

  private failAll(err: Error): void {
    const waiters = this.pending;
    this.pending = [];
    for (const w of waiters) w.reject(err);
  }

  request(msg: Record<string, unknown>): Promise<ServerMessage> {
    if (!this.socket) return Promise.reject(new Error('not connected'));
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.socket!.write(JSON.stringify(msg) + '\n');
    });
  }

  async hello(): Promise<HelloMessage> {
    const reply = await this.request({ type: 'hello' });
    if (reply.type !== 'hello') throw new ProtocolError(`expected hello, got ${reply.type}`);
    return reply;
  }

  async reset(seed: number, instancePath?: string): Promise<ObsMessage> {
    const msg: Record<string, unknown> = { type: 'reset', seed };
    if (instancePath !== undefined) msg['instance_path'] = instancePath;
    const reply = await this.request(msg);
    if (reply.type === 'error') throw new ProtocolError(reply.message);
    if (reply.type !== 'obs') throw new ProtocolError(`expected obs after reset, got ${reply.type}`);
    return reply;
  }

  async step(action: number): Promise<ObsMessage | EpisodeEndMessage> {
    const reply = await this.request({ type: 'step', action });
    if (reply.type === 'error') throw new ProtocolError(reply.message);
    if (reply.type !== 'obs' && reply.type !== 'episode_end') {
      throw new ProtocolError(`expected obs or episode_end, got ${reply.type}`);
    }
    return reply;
  }

  close(): void {
    this.socket?.destroy();
    this.socket = null;
  }
}
