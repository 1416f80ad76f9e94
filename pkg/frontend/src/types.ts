/** Payload shapes of the /api/v1 report service. */

export interface LFScores {
  RND: number | null;
  ACC: number | null;
  COV: number | null;
  IWS: number | null;
}

export interface LFRow {
  index: number;
  name: string;
  accuracy: number | null;
  coverage: number;
  overlap: number;
  conflict: number;
  activation_count: number;
  weshap: number;
  scores: LFScores;
}

export interface Report {
  version: string;
  fingerprint: string;
  num_classes: number;
  num_train: number;
  num_lfs: number;
  holdout_size: number;
  seed: number;
  config: { k: number; metric: string; weighting: string };
  soft_accuracy_full: number;
  base_valid_accuracy: number;
  base_test_accuracy: number | null;
  lf_table: LFRow[];
  weshap: {
    config: { k: number; metric: string; weighting: string };
    lf_values: number[];
    contributions: { i: number; j: number; w: number }[];
    holdout_size: number;
    soft_accuracy_full: number;
  };
}

export interface WhatIfRequest {
  disabled_lfs: number[];
  theta: number | null;
}

export interface WhatIfResponse {
  fingerprint: string;
  disabled_lfs: number[];
  theta: number | null;
  valid_acc: number;
  test_acc: number | null;
  lf_values: number[];
}

export interface ExplainNeighbor {
  row: number;
  distance: number;
  weight_share: number;
  lf_weights: Record<string, number>;
}

export interface ExplainResponse {
  fingerprint: string;
  val_index: number;
  label: number;
  lf_values: number[];
  top_positive: { lf: number; value: number }[];
  top_negative: { lf: number; value: number }[];
  neighbors: ExplainNeighbor[];
  lowest_entries: { i: number; j: number; w: number }[];
}

export interface HistoryStep {
  action: WhatIfRequest;
  valid_acc: number;
  test_acc: number | null;
}
