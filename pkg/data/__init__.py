from .records import InteractionRecord, Vocab, UserSequence, Instance, SplitDataset
from .ingest import ingest, read_interactions, write_interactions, IngestResult
from .preprocess import filter_core, build_sequences, build_vocab
from .split import leave_one_out_split, sample_negatives
from .synth import synth_generate, empirical_transition_rate
from .store import save_split, load_split, split_exists

__all__ = [
    "InteractionRecord",
    "Vocab",
    "UserSequence",
    "Instance",
    "SplitDataset",
    "ingest",
    "read_interactions",
    "write_interactions",
    "IngestResult",
    "filter_core",
    "build_sequences",
    "build_vocab",
    "leave_one_out_split",
    "sample_negatives",
    "synth_generate",
    "empirical_transition_rate",
    "save_split",
    "load_split",
    "split_exists",
]
