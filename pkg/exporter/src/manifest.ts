// Bundle manifest schema, version 1. This is the exchange format the
// scoring core validates on load: relative .f32 tensor references with
// explicit shapes, per-image labels and confidences. Keys beyond the
// required set (scorecam_channels, gradient_check) are informational.

export interface TensorRef {
  file: string;
  shape: number[];
}

export interface LayerRefs {
  activations: TensorRef;
  gradients?: TensorRef;
  channel_scores?: TensorRef;
  scorecam_channels?: number[];
}

export interface ManifestImageEntry {
  image_id: string;
  true_label: number;
  confidences: number[];
  scorecam_baseline: string;
  layers: Record<string, LayerRefs>;
}

export interface GradientCheckReport {
  positions: number;
  epsilon: number;
  max_rel_err: number;
}

export interface BundleManifest {
  version: 1;
  architecture: string;
  checkpoint_id: string;
  head_type: string;
  target_layers: string[];
  class_names?: string[];
  gradient_check?: GradientCheckReport;
  images: ManifestImageEntry[];
}

export const MANIFEST_NAME = 'manifest.json';
