"""Stage seeds derived from one master seed by fixed offsets."""

import numpy as np

STAGE_SYNTH = 1
STAGE_PCA = 2
STAGE_KMEANS = 3
STAGE_SVM = 4
STAGE_PCA_SAMPLE = 5
STAGE_KMEANS_SAMPLE = 6


def derive_seed(master_seed: int, stage: int, index: int = 0) -> int:
    """Deterministic per-(stage, fold) seed from the master seed."""
    ss = np.random.SeedSequence([int(master_seed), int(stage), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] & 0x7FFFFFFF)
