/**
 * Interactive review view: one session on a canvas, the rest in a sidebar.
 *
 * The view never computes BQI or guesses label outcomes. A click hit-tests
 * the decoded label map locally for instant highlight, sends the edit, and
 * applies whatever the server acknowledges; on rejection the highlight is
 * reverted and the error shown in the banner. Edits run through a strict
 * FIFO queue so at most one request is in flight.
 */

import {
  ApiError,
  type ClassLabel,
  type EditAck,
  type ReviewApi,
  type SessionState,
  type SessionSummary,
} from "./api";
import { boundingBoxes, superpixelIdAt, type PixelGrid } from "./labelmap";
import { formatBqi } from "./format";
import { decodePngBrowser, loadBitmapBrowser } from "./png";
import { EditQueue } from "./queue";
import { fitImage, pan, pixelAt, zoomAt, type Viewport } from "./viewport";

export type Tool = { kind: "cycle" } | { kind: "label"; label: ClassLabel };

export interface RectLike {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface ViewOptions {
  /** PNG -> RGBA pixels; tests inject a pure decoder. */
  decodePng?: (bytes: ArrayBuffer) => Promise<PixelGrid>;
  /** PNG -> drawable bitmap; may resolve null where canvases can't draw. */
  loadBitmap?: (bytes: ArrayBuffer) => Promise<CanvasImageSource | null>;
  /** Canvas position/size in client coordinates; tests stub the layout. */
  canvasRect?: (canvas: HTMLCanvasElement) => RectLike;
  /** Fallback view size when the canvas has no layout yet. */
  viewWidth?: number;
  viewHeight?: number;
}

/** Everything the widgets display, as one readable snapshot. */
export interface UiSessionView {
  state: SessionState;
  tool: Tool;
  hover: number | null;
  canUndo: boolean;
  overlayOn: boolean;
  pendingEdit: number | null;
  error: string | null;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return err.message;
  return String(err);
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

const TOOLS: Array<{ key: string; title: string; tool: Tool }> = [
  { key: "cycle", title: "Cycle (c)", tool: { kind: "cycle" } },
  { key: "background", title: "Background (1)", tool: { kind: "label", label: "background" } },
  { key: "tooth", title: "Tooth (2)", tool: { kind: "label", label: "tooth" } },
  { key: "biofilm", title: "Biofilm (3)", tool: { kind: "label", label: "biofilm" } },
];

export class SessionView {
  private readonly decodePng: (bytes: ArrayBuffer) => Promise<PixelGrid>;
  private readonly loadBitmap: (bytes: ArrayBuffer) => Promise<CanvasImageSource | null>;
  private readonly canvasRect: (canvas: HTMLCanvasElement) => RectLike;
  private readonly fallbackWidth: number;
  private readonly fallbackHeight: number;

  private sessions: SessionSummary[] = [];
  private state: SessionState | null = null;
  private grid: PixelGrid | null = null;
  private boxes: Int32Array | null = null;
  private viewport: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };
  private tool: Tool = { kind: "cycle" };
  private hover: number | null = null;
  private overlayOn = true;
  private pendingEdit: number | null = null;
  private error: string | null = null;
  private readonly queue = new EditQueue();

  private imageBitmap: CanvasImageSource | null = null;
  private overlayBitmap: CanvasImageSource | null = null;

  private panning = false;
  private dragMoved = false;
  private lastDrag = { x: 0, y: 0 };

  private sessionList!: HTMLElement;
  private canvas!: HTMLCanvasElement;
  private banner!: HTMLElement;
  private bqiEl!: HTMLElement;
  private revisionEl!: HTMLElement;
  private statusEl!: HTMLElement;
  private toolButtons = new Map<string, HTMLButtonElement>();
  private undoButton!: HTMLButtonElement;
  private overlayButton!: HTMLButtonElement;

  private readonly keyHandler = (e: KeyboardEvent) => this.handleKey(e);
  private readonly mouseUpHandler = () => {
    this.panning = false;
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ReviewApi,
    opts: ViewOptions = {},
  ) {
    this.decodePng = opts.decodePng ?? decodePngBrowser;
    this.loadBitmap = opts.loadBitmap ?? loadBitmapBrowser;
    this.canvasRect = opts.canvasRect ?? ((canvas) => canvas.getBoundingClientRect());
    this.fallbackWidth = opts.viewWidth ?? 640;
    this.fallbackHeight = opts.viewHeight ?? 480;
    this.build();
    this.wire();
    this.render();
  }

  /** Current display state; null before a session is open. */
  get view(): UiSessionView | null {
    if (!this.state) return null;
    return {
      state: this.state,
      tool: this.tool,
      hover: this.hover,
      canUndo: this.state.revision > 0,
      overlayOn: this.overlayOn,
      pendingEdit: this.pendingEdit,
      error: this.error,
    };
  }

  /** Resolves after every queued edit has been acknowledged and applied. */
  idle(): Promise<void> {
    return this.queue.idle();
  }

  async start(): Promise<void> {
    try {
      this.sessions = await this.api.listSessions();
      this.error = null;
    } catch (err) {
      this.error = describeError(err);
      this.render();
      return;
    }
    this.render();
    if (this.sessions.length > 0) {
      await this.open(this.sessions[0].session_id);
    }
  }

  async open(sessionId: string): Promise<void> {
    try {
      const state = await this.api.getState(sessionId);
      const bytes = await this.api.fetchBytes(state.label_map_url);
      const grid = await this.decodePng(bytes);
      this.state = state;
      this.grid = grid;
      this.boxes = boundingBoxes(grid, state.superpixel_count);
      const size = this.viewSize();
      this.viewport = fitImage(state.width, state.height, size.width, size.height);
      this.hover = null;
      this.pendingEdit = null;
      this.error = null;
      this.render();
      await this.loadBitmaps(state);
    } catch (err) {
      this.error = describeError(err);
      this.render();
    }
  }

  selectTool(tool: Tool): void {
    this.tool = tool;
    this.render();
  }

  toggleOverlay(): void {
    this.overlayOn = !this.overlayOn;
    this.render();
  }

  /** Queue an undo, then resync the whole state from the server. */
  undo(): Promise<void> {
    const state = this.state;
    if (!state || state.revision === 0) return Promise.resolve();
    const sid = state.session_id;
    return this.queue.run(async () => {
      try {
        await this.api.undo(sid);
        const fresh = await this.api.getState(sid);
        if (!this.state || this.state.session_id !== sid) return;
        this.state = fresh;
        this.pendingEdit = null;
        this.error = null;
        this.render();
        void this.refreshOverlay(sid);
      } catch (err) {
        this.failEdit(err);
      }
    });
  }

  /** Resolve a client-coordinate click to a superpixel and queue the edit. */
  handleClick(clientX: number, clientY: number): void {
    if (this.dragMoved) {
      this.dragMoved = false;
      return;
    }
    if (!this.state || !this.grid) return;
    const rect = this.canvasRect(this.canvas);
    const sx = clientX - rect.left;
    const sy = clientY - rect.top;
    if (sx < 0 || sy < 0 || sx >= rect.width || sy >= rect.height) return;
    const px = pixelAt(this.viewport, sx, sy, this.state.width, this.state.height);
    if (!px) return;
    const sp = superpixelIdAt(this.grid, px.x, px.y);
    if (sp === null || sp >= this.state.superpixel_count) return;
    this.beginEdit(sp, px);
  }

  dispose(): void {
    document.removeEventListener("keydown", this.keyHandler);
    document.removeEventListener("mouseup", this.mouseUpHandler);
  }

  private beginEdit(sp: number, px: { x: number; y: number }): void {
    const state = this.state;
    if (!state) return;
    const sid = state.session_id;
    const tool = this.tool;
    this.pendingEdit = sp;
    this.render();
    void this.queue.run(async () => {
      try {
        const ack =
          tool.kind === "cycle"
            ? await this.api.toggle(sid, px.x, px.y)
            : await this.api.setLabel(sid, sp, tool.label);
        this.applyAck(sid, ack);
      } catch (err) {
        this.failEdit(err);
      }
    });
  }

  private applyAck(sid: string, ack: EditAck): void {
    if (!this.state || this.state.session_id !== sid) return;
    this.state.labels[ack.superpixel] = ack.new_label;
    this.state.bqi = ack.bqi;
    this.state.revision = ack.revision;
    this.pendingEdit = null;
    this.error = null;
    this.render();
    void this.refreshOverlay(sid);
  }

  private failEdit(err: unknown): void {
    this.pendingEdit = null;
    this.error = describeError(err);
    this.render();
  }

  private async loadBitmaps(state: SessionState): Promise<void> {
    this.imageBitmap = await this.fetchBitmap(state.image_url);
    this.overlayBitmap = await this.fetchBitmap(state.overlay_url);
    this.draw();
  }

  private async refreshOverlay(sid: string): Promise<void> {
    if (!this.state || this.state.session_id !== sid) return;
    // cache-bust so the canvas shows the post-edit rendering
    const url = `${this.state.overlay_url}?rev=${this.state.revision}`;
    this.overlayBitmap = await this.fetchBitmap(url);
    this.draw();
  }

  private async fetchBitmap(url: string): Promise<CanvasImageSource | null> {
    try {
      return await this.loadBitmap(await this.api.fetchBytes(url));
    } catch {
      return null; // bitmaps are cosmetic; state and labels do not depend on them
    }
  }

  private viewSize(): { width: number; height: number } {
    const rect = this.canvasRect(this.canvas);
    if (rect.width > 0 && rect.height > 0) {
      return { width: rect.width, height: rect.height };
    }
    return { width: this.fallbackWidth, height: this.fallbackHeight };
  }

  private build(): void {
    this.root.innerHTML = "";
    const shell = el("div", "review-shell");

    const sidebar = el("aside", "sidebar");
    sidebar.append(el("h2", "sidebar-title", "Sessions"));
    this.sessionList = el("ul", "session-list");
    sidebar.append(this.sessionList);

    const workspace = el("main", "workspace");
    const toolbar = el("div", "toolbar");
    for (const { key, title, tool } of TOOLS) {
      const button = el("button", "tool-button", title) as HTMLButtonElement;
      button.dataset.tool = key;
      button.addEventListener("click", () => this.selectTool(tool));
      this.toolButtons.set(key, button);
      toolbar.append(button);
    }
    this.undoButton = el("button", "undo-button", "Undo (u)") as HTMLButtonElement;
    this.undoButton.dataset.action = "undo";
    this.undoButton.addEventListener("click", () => void this.undo());
    this.overlayButton = el("button", "overlay-button", "Overlay (o)") as HTMLButtonElement;
    this.overlayButton.dataset.action = "overlay";
    this.overlayButton.addEventListener("click", () => this.toggleOverlay());
    this.bqiEl = el("span", "bqi-readout");
    this.revisionEl = el("span", "revision-readout");
    this.statusEl = el("span", "status-line");
    toolbar.append(this.undoButton, this.overlayButton, this.bqiEl, this.revisionEl, this.statusEl);

    this.banner = el("div", "error-banner");
    this.banner.hidden = true;

    const wrap = el("div", "canvas-wrap");
    this.canvas = document.createElement("canvas");
    this.canvas.className = "view-canvas";
    wrap.append(this.canvas);

    workspace.append(toolbar, this.banner, wrap);
    shell.append(sidebar, workspace);
    this.root.append(shell);
  }

  private wire(): void {
    this.canvas.addEventListener("click", (e) => this.handleClick(e.clientX, e.clientY));
    this.canvas.addEventListener("mousemove", (e) => this.handleMove(e));
    this.canvas.addEventListener("wheel", (e) => this.handleWheel(e), { passive: false });
    this.canvas.addEventListener("mousedown", (e) => this.handleMouseDown(e));
    document.addEventListener("mouseup", this.mouseUpHandler);
    document.addEventListener("keydown", this.keyHandler);
  }

  private handleKey(e: KeyboardEvent): void {
    switch (e.key) {
      case "1":
        this.selectTool({ kind: "label", label: "background" });
        break;
      case "2":
        this.selectTool({ kind: "label", label: "tooth" });
        break;
      case "3":
        this.selectTool({ kind: "label", label: "biofilm" });
        break;
      case "c":
        this.selectTool({ kind: "cycle" });
        break;
      case "u":
        void this.undo();
        break;
      case "o":
        this.toggleOverlay();
        break;
    }
  }

  private handleMove(e: MouseEvent): void {
    if (this.panning) {
      const dx = e.clientX - this.lastDrag.x;
      const dy = e.clientY - this.lastDrag.y;
      this.lastDrag = { x: e.clientX, y: e.clientY };
      if (dx !== 0 || dy !== 0) this.dragMoved = true;
      this.viewport = pan(this.viewport, dx, dy);
      this.draw();
      return;
    }
    if (!this.state || !this.grid) return;
    const rect = this.canvasRect(this.canvas);
    const px = pixelAt(
      this.viewport,
      e.clientX - rect.left,
      e.clientY - rect.top,
      this.state.width,
      this.state.height,
    );
    const sp = px ? superpixelIdAt(this.grid, px.x, px.y) : null;
    const hover = sp !== null && sp < this.state.superpixel_count ? sp : null;
    if (hover !== this.hover) {
      this.hover = hover;
      this.syncStatus();
      this.draw();
    }
  }

  private handleWheel(e: WheelEvent): void {
    if (!this.state) return;
    e.preventDefault();
    const rect = this.canvasRect(this.canvas);
    const factor = Math.exp(-e.deltaY * 0.0015);
    this.viewport = zoomAt(this.viewport, e.clientX - rect.left, e.clientY - rect.top, factor);
    this.draw();
  }

  private handleMouseDown(e: MouseEvent): void {
    // middle button or alt-drag pans; plain left click stays an edit
    if (e.button === 1 || (e.button === 0 && e.altKey)) {
      this.panning = true;
      this.dragMoved = false;
      this.lastDrag = { x: e.clientX, y: e.clientY };
      e.preventDefault();
    }
  }

  private render(): void {
    this.syncSidebar();
    this.syncToolbar();
    this.syncStatus();
    this.syncBanner();
    this.draw();
  }

  private syncSidebar(): void {
    this.sessionList.innerHTML = "";
    for (const summary of this.sessions) {
      const item = el("li", "session-item");
      const button = el("button", "session-link", summary.image) as HTMLButtonElement;
      button.dataset.sessionId = summary.session_id;
      if (this.state && this.state.session_id === summary.session_id) {
        item.classList.add("active");
      }
      button.addEventListener("click", () => void this.open(summary.session_id));
      item.append(button);
      this.sessionList.append(item);
    }
  }

  private syncToolbar(): void {
    this.bqiEl.textContent = this.state ? formatBqi(this.state.bqi) : "";
    this.revisionEl.textContent = this.state ? `rev ${this.state.revision}` : "";
    this.undoButton.disabled = !this.state || this.state.revision === 0;
    this.overlayButton.setAttribute("aria-pressed", String(this.overlayOn));
    for (const { key, tool } of TOOLS) {
      const active =
        tool.kind === this.tool.kind &&
        (tool.kind === "cycle" || (this.tool.kind === "label" && tool.label === this.tool.label));
      this.toolButtons.get(key)?.setAttribute("aria-pressed", String(active));
    }
  }

  private syncStatus(): void {
    if (this.state && this.hover !== null) {
      const label = this.state.labels[this.hover];
      this.statusEl.textContent = `superpixel ${this.hover} · ${label}`;
    } else {
      this.statusEl.textContent = "";
    }
  }

  private syncBanner(): void {
    if (this.error) {
      this.banner.textContent = this.error;
      this.banner.hidden = false;
    } else {
      this.banner.hidden = true;
    }
  }

  private draw(): void {
    const ctx =
      typeof this.canvas.getContext === "function" ? this.canvas.getContext("2d") : null;
    if (!ctx || !this.state) return;
    const size = this.viewSize();
    if (this.canvas.width !== size.width) this.canvas.width = size.width;
    if (this.canvas.height !== size.height) this.canvas.height = size.height;
    ctx.save();
    ctx.setTransform(1, 0, 0, 1, 0, 0);
    ctx.fillStyle = "#14171c";
    ctx.fillRect(0, 0, size.width, size.height);
    ctx.setTransform(
      this.viewport.scale,
      0,
      0,
      this.viewport.scale,
      this.viewport.offsetX,
      this.viewport.offsetY,
    );
    ctx.imageSmoothingEnabled = false;
    const bitmap = this.overlayOn ? (this.overlayBitmap ?? this.imageBitmap) : this.imageBitmap;
    if (bitmap) ctx.drawImage(bitmap, 0, 0);
    if (this.boxes) {
      if (this.hover !== null) this.outlineSuperpixel(ctx, this.hover);
      if (this.pendingEdit !== null) this.fillSuperpixel(ctx, this.pendingEdit);
    }
    ctx.restore();
  }

  private box(sp: number): { x: number; y: number; w: number; h: number } | null {
    if (!this.boxes || sp * 4 >= this.boxes.length) return null;
    const x0 = this.boxes[sp * 4];
    const y0 = this.boxes[sp * 4 + 1];
    const x1 = this.boxes[sp * 4 + 2];
    const y1 = this.boxes[sp * 4 + 3];
    if (x1 < x0) return null; // id never seen in the label map
    return { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 };
  }

  private outlineSuperpixel(ctx: CanvasRenderingContext2D, sp: number): void {
    const b = this.box(sp);
    if (!b) return;
    ctx.strokeStyle = "rgba(255,255,255,0.9)";
    ctx.lineWidth = 1 / this.viewport.scale;
    ctx.strokeRect(b.x, b.y, b.w, b.h);
  }

  private fillSuperpixel(ctx: CanvasRenderingContext2D, sp: number): void {
    const b = this.box(sp);
    if (!b) return;
    ctx.fillStyle = "rgba(255,255,255,0.35)";
    ctx.fillRect(b.x, b.y, b.w, b.h);
  }
}
