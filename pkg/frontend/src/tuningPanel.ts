import type { ApiClient } from "./api.js";
import type { DetectorConfig, FieldErrors } from "./types.js";

const NUMERIC_FIELDS = ["tau", "avg_window", "score_on", "score_off", "min_event_frames"] as const;
const INT_FIELDS = new Set(["tau", "avg_window", "min_event_frames"]);
const DETECTORS = ["diff", "gmm", "edgefit"];

export interface TuningPanelOptions {
  container: HTMLElement;
  api: ApiClient;
  /** Called with the server's accepted config after every load or save. */
  onConfig?: (config: DetectorConfig) => void;
}

/** Threshold and detector controls, server-authoritative.
 *
 * Every edit PUTs the merged config and then re-reads it; rejected edits show
 * the per-field errors and snap the inputs back to what the server runs.
 */
export class TuningPanel {
  private api: ApiClient;
  private onConfig?: (config: DetectorConfig) => void;
  private serverConfig: DetectorConfig | null = null;
  private inputs = new Map<string, HTMLInputElement>();
  private detectorSelect: HTMLSelectElement;
  private errorBoxes = new Map<string, HTMLElement>();

  constructor(opts: TuningPanelOptions) {
    this.api = opts.api;
    this.onConfig = opts.onConfig;
    const { container } = opts;

    this.detectorSelect = document.createElement("select");
    this.detectorSelect.id = "field-detector";
    for (const name of DETECTORS) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      this.detectorSelect.appendChild(option);
    }
    container.appendChild(this.row("detector", this.detectorSelect));
    this.detectorSelect.addEventListener("change", () =>
      void this.submit("detector", this.detectorSelect.value),
    );

    for (const field of NUMERIC_FIELDS) {
      const input = document.createElement("input");
      input.type = "number";
      input.id = `field-${field}`;
      input.step = INT_FIELDS.has(field) ? "1" : "0.5";
      this.inputs.set(field, input);
      container.appendChild(this.row(field, input));
      input.addEventListener("change", () => {
        const raw = input.value;
        const value = INT_FIELDS.has(field) ? parseInt(raw, 10) : parseFloat(raw);
        void this.submit(field, value);
      });
    }
  }

  private row(label: string, control: HTMLElement): HTMLElement {
    const wrapper = document.createElement("label");
    wrapper.className = "tuning-row";
    const span = document.createElement("span");
    span.textContent = label.replace(/_/g, " ");
    const error = document.createElement("small");
    error.className = "field-error";
    error.id = `error-${label}`;
    this.errorBoxes.set(label, error);
    wrapper.append(span, control, error);
    return wrapper;
  }

  async loadFromServer(): Promise<void> {
    this.render(await this.api.getConfig());
  }

  get config(): DetectorConfig | null {
    return this.serverConfig;
  }

  private render(config: DetectorConfig): void {
    this.serverConfig = config;
    this.detectorSelect.value = config.detector;
    for (const field of NUMERIC_FIELDS) {
      const input = this.inputs.get(field)!;
      input.value = String(config[field]);
    }
    this.clearErrors();
    this.onConfig?.(config);
  }

  private clearErrors(): void {
    for (const box of this.errorBoxes.values()) {
      box.textContent = "";
    }
  }

  private showErrors(errors: FieldErrors): void {
    this.clearErrors();
    for (const [field, message] of Object.entries(errors)) {
      const box = this.errorBoxes.get(field);
      if (box) {
        box.textContent = message;
      } else {
        this.errorBoxes.get("detector")!.textContent = `${field}: ${message}`;
      }
    }
  }

  async submit(field: string, value: unknown): Promise<boolean> {
    if (!this.serverConfig) {
      return false;
    }
    const proposed = { ...this.serverConfig, [field]: value };
    const result = await this.api.putConfig(proposed);
    if (!result.ok) {
      this.showErrors(result.errors);
      // Snap back to the authoritative values.
      this.render(await this.api.getConfig());
      this.showErrors(result.errors);
      return false;
    }
    this.render(await this.api.getConfig());
    return true;
  }
}
