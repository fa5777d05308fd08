"""Truth inference for crowdsourced annotations.

Aggregates noisy categorical, pairwise, sequential, and segmentation
responses into consensus answers, estimates worker skills, computes
annotation-quality metrics, and benchmarks everything reproducibly on
synthetic or locally supplied datasets.
"""

__version__ = "0.1.0"

from .datamodel import (
    AggregationResult,
    AnnotationTable,
    GroundTruth,
    MaskSet,
    PairwiseTable,
    ScoreResult,
    SequenceTable,
    Trace,
)
from .categorical import (
    DawidSkene,
    Glad,
    Kos,
    Mace,
    MajorityVote,
    MMsr,
    Wawa,
    dawid_skene,
    glad,
    kos,
    mace,
    majority_vote,
    mmsr,
    wawa,
)
from .pairwise import (
    BradleyTerry,
    NoisyBradleyTerry,
    RandomBaseline,
    bradley_terry,
    noisy_bt,
    random_baseline,
)
from .sequence import Hrrasa, Rasa, Rover, TrigramEmbedder, hrrasa, rasa, rover
from .segmentation import (
    SegmentationEM,
    SegmentationMajorityVote,
    SegmentationRasa,
    seg_em,
    seg_majority_vote,
    seg_rasa,
)
from .quality import (
    agreement_with_aggregate,
    ds_posterior_quality,
    krippendorff_alpha,
    uncertainty,
)
from .metrics import accuracy, corpus_wer, iou, mean_iou, spearman_rho, wer
from .io import ingest_categorical, ingest_masks, ingest_pairwise, ingest_sequence
from .catalog import fetch_dataset, load_catalog, load_catalog_dataset
