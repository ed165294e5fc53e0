import { ServiceClient } from "./api";
import { IDENTITY_VIEW, type ViewTransform } from "./coords";
import { buildLegend, buildOverlays } from "./overlay";
import { canSubmit, QuerySession, submitQuery } from "./session";
import type { HistoryEntry, ModelInfo } from "./types";
import { applyWindowLevel } from "./viewer";

const client = new ServiceClient("");
const session = new QuerySession();

const canvas = document.getElementById("viewer") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const fileInput = document.getElementById("image-file") as HTMLInputElement;
const phraseInput = document.getElementById("phrase") as HTMLInputElement;
const submitButton = document.getElementById("submit") as HTMLButtonElement;
const modelList = document.getElementById("models") as HTMLDivElement;
const legendBox = document.getElementById("legend") as HTMLDivElement;
const errorBox = document.getElementById("errors") as HTMLDivElement;
const historyBox = document.getElementById("history") as HTMLDivElement;
const zoomInput = document.getElementById("zoom") as HTMLInputElement;
const windowInput = document.getElementById("wl-window") as HTMLInputElement;
const levelInput = document.getElementById("wl-level") as HTMLInputElement;

let view: ViewTransform = { ...IDENTITY_VIEW };
let baseImage: ImageBitmap | null = null;
let basePixels: ImageData | null = null;
let shownEntries: HistoryEntry[] = [];

function refreshSubmitState(): void {
  submitButton.disabled = !canSubmit(phraseInput.value, session, selectedModels());
}

function selectedModels(): string[] {
  return [...modelList.querySelectorAll<HTMLInputElement>("input:checked")].map(
    (el) => el.value,
  );
}

function redraw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (baseImage && basePixels) {
    const shown = applyWindowLevel(
      basePixels.data,
      Number(windowInput.value),
      Number(levelInput.value),
    );
    const img = new ImageData(basePixels.width, basePixels.height);
    img.data.set(shown);
    const off = document.createElement("canvas");
    off.width = basePixels.width;
    off.height = basePixels.height;
    (off.getContext("2d") as CanvasRenderingContext2D).putImageData(img, 0, 0);
    ctx.save();
    ctx.setTransform(view.zoom, 0, 0, view.zoom, view.panX, view.panY);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0);
    ctx.restore();
  }
  const overlays = buildOverlays(shownEntries, view);
  for (const overlay of overlays) {
    ctx.strokeStyle = overlay.color;
    ctx.lineWidth = 2;
    ctx.strokeRect(overlay.rect.x, overlay.rect.y, overlay.rect.w, overlay.rect.h);
  }
  legendBox.replaceChildren(
    ...buildLegend(overlays).map((entry) => {
      const item = document.createElement("div");
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = entry.color;
      item.append(swatch, ` ${entry.label}`);
      return item;
    }),
  );
}

function renderHistory(): void {
  historyBox.replaceChildren(
    ...session.history.map((entry) => {
      const row = document.createElement("div");
      const button = document.createElement("button");
      button.textContent = "replay";
      button.addEventListener("click", () => {
        shownEntries = [session.replay(entry.requestId)];
        redraw();
      });
      row.append(
        button,
        ` #${entry.requestId} "${entry.phrase}" → ${entry.modelId} [${entry.box
          .map((v) => v.toFixed(1))
          .join(", ")}]`,
      );
      return row;
    }),
  );
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  session.setImage(file, file.name);
  baseImage = await createImageBitmap(file);
  const off = document.createElement("canvas");
  off.width = baseImage.width;
  off.height = baseImage.height;
  const octx = off.getContext("2d") as CanvasRenderingContext2D;
  octx.drawImage(baseImage, 0, 0);
  basePixels = octx.getImageData(0, 0, off.width, off.height);
  shownEntries = [];
  refreshSubmitState();
  redraw();
});

phraseInput.addEventListener("input", refreshSubmitState);
modelList.addEventListener("change", refreshSubmitState);

zoomInput.addEventListener("input", () => {
  view = { ...view, zoom: Number(zoomInput.value) };
  redraw();
});
windowInput.addEventListener("input", redraw);
levelInput.addEventListener("input", redraw);

submitButton.addEventListener("click", async () => {
  errorBox.textContent = "";
  submitButton.disabled = true;
  try {
    const result = await submitQuery(client, session, phraseInput.value, selectedModels());
    shownEntries = result.entries;
    if (result.errors.length > 0) {
      errorBox.replaceChildren(
        ...result.errors.map((err) => {
          const div = document.createElement("div");
          div.className = "error";
          div.textContent = `${err.modelId}: ${err.message}`;
          return div;
        }),
      );
    }
    renderHistory();
    redraw();
  } finally {
    refreshSubmitState();
  }
});

async function boot(): Promise<void> {
  try {
    const models: ModelInfo[] = await client.listModels();
    modelList.replaceChildren(
      ...models.map((model, i) => {
        const label = document.createElement("label");
        const box = document.createElement("input");
        box.type = "checkbox";
        box.value = model.model_id;
        box.checked = i === 0; // single-model mode by default
        label.append(box, ` ${model.model_id} (${model.stage})`);
        return label;
      }),
    );
  } catch (err) {
    errorBox.textContent = `service unreachable: ${String(err)}`;
  }
  refreshSubmitState();
}

void boot();
