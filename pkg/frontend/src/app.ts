import { ApiClient } from "./api.js";
import { TryOnController } from "./controller.js";
import { Session } from "./state.js";
import { CatalogItem } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

/** Downscale an upload so the payload stays near the working resolution. */
async function downscale(file: Blob, maxSide: number): Promise<Blob> {
  const bitmap = await createImageBitmap(file);
  const scale = Math.min(1, maxSide / Math.max(bitmap.width, bitmap.height));
  if (scale === 1) return file;
  const canvas = document.createElement("canvas");
  canvas.width = Math.round(bitmap.width * scale);
  canvas.height = Math.round(bitmap.height * scale);
  const ctx = canvas.getContext("2d");
  if (!ctx) return file;
  ctx.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
  return new Promise((resolve) =>
    canvas.toBlob((b) => resolve(b ?? file), "image/png"));
}

export class App {
  private controller: TryOnController;
  private catalog: CatalogItem[] = [];
  private maxSide = 512;
  private personUrl: string | null = null;

  constructor(private api: ApiClient) {
    this.controller = new TryOnController(api, (s) => this.render(s));
  }

  async start(): Promise<void> {
    $("photo-input").addEventListener("change", (e) => this.onPhoto(e));
    $("submit-btn").addEventListener("click", () => {
      void this.controller.submit();
    });
    $("cancel-btn").addEventListener("click", () => this.controller.cancel());
    $("catalog-retry").addEventListener("click", () => {
      void this.loadCatalog();
    });
    try {
      const health = await this.api.health();
      if (health.workingResolution) {
        this.maxSide = Math.max(...health.workingResolution) * 4;
      }
    } catch {
      /* banner appears via catalog load below */
    }
    await this.loadCatalog();
    this.render(this.controller.state);
  }

  private async loadCatalog(): Promise<void> {
    const banner = $("banner");
    banner.hidden = true;
    try {
      this.catalog = await this.api.fetchCatalog();
      this.renderCatalog();
    } catch (err) {
      banner.hidden = false;
      banner.textContent =
        `catalog unavailable (${String(err)}) — retry when the service is up`;
    }
  }

  private async onPhoto(event: Event): Promise<void> {
    const input = event.target as HTMLInputElement;
    const file = input.files && input.files[0];
    if (!file) return;
    const small = await downscale(file, this.maxSide);
    if (this.personUrl) URL.revokeObjectURL(this.personUrl);
    this.personUrl = URL.createObjectURL(small);
    $("photo-preview").setAttribute("src", this.personUrl);
    this.controller.setPhoto(small);
  }

  private renderCatalog(): void {
    const grid = $("catalog-grid");
    grid.replaceChildren();
    if (this.catalog.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = "No garments in the catalog yet.";
      grid.appendChild(empty);
      return;
    }
    for (const item of this.catalog) {
      const tile = document.createElement("button");
      tile.className = "tile";
      tile.dataset.garment = item.id;
      const img = document.createElement("img");
      img.src = `data:image/png;base64,${item.thumbnail_png_base64}`;
      img.alt = item.id;
      const label = document.createElement("span");
      label.textContent = item.id;
      tile.append(img, label);
      tile.addEventListener("click", () =>
        this.controller.selectGarment(item.id));
      grid.appendChild(tile);
    }
  }

  private render(s: Session): void {
    $("phase").textContent = s.phase.replace(/_/g, " ");
    const submit = $<HTMLButtonElement>("submit-btn");
    submit.disabled = !(s.phase === "ready" || s.phase === "result"
      || s.phase === "rejected");
    $<HTMLButtonElement>("cancel-btn").hidden = s.phase !== "pending";
    const banner = $("banner");
    if (s.error) {
      banner.hidden = false;
      banner.textContent = s.error;
    }

    for (const tile of document.querySelectorAll<HTMLElement>(".tile")) {
      tile.classList.toggle("selected", tile.dataset.garment === s.garmentId);
    }

    const result = $("result-view");
    const last = s.history[s.history.length - 1];
    if (s.phase === "result" && last?.imageUrl) {
      result.hidden = false;
      $("result-img").setAttribute("src", last.imageUrl);
      $("result-note").textContent =
        `garment ${last.garmentId} — realism ${last.rejectionScore.toFixed(2)}`;
    } else if (s.phase === "rejected" && last) {
      result.hidden = false;
      $("result-img").removeAttribute("src");
      $("result-note").textContent =
        `rejected (realism ${last.rejectionScore.toFixed(2)}) — ` +
        "try another garment";
    } else if (s.phase === "pending") {
      $("result-note").textContent = "generating…";
    }

    this.renderHistory(s);
  }

  private renderHistory(s: Session): void {
    const strip = $("history-strip");
    strip.replaceChildren();
    s.history.forEach((record, i) => {
      const cell = document.createElement("button");
      cell.className = "history-cell";
      cell.title = `attempt ${i + 1}: ${record.garmentId} (${record.outcome})`;
      if (record.imageUrl) {
        const img = document.createElement("img");
        img.src = record.imageUrl;
        img.alt = record.garmentId;
        cell.appendChild(img);
      } else {
        cell.textContent = `✕ ${record.garmentId}`;
      }
      // re-selecting from history pre-fills the garment picker
      cell.addEventListener("click", () =>
        this.controller.selectGarment(record.garmentId));
      strip.appendChild(cell);
    });
  }
}
