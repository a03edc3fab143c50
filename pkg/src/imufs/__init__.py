"""Incremental unsupervised feature selection for incomplete multi-view streams."""

from .dataset import (DatasetError, MultiViewChunk, MultiViewDataset, ViewSpec, chunkify,
                      load_dataset, mask_incomplete, save_dataset)
from .graph import SimilarityGraph, build_graph
from .impute import ColdStartError, ImputeState, impute_chunk, reset
from .metrics import Partition, ari, evaluate_selection, f_measure, kmeans, nmi
from .solver import (C_I2MUFS, I2MUFS, ChunkReport, ChunkWorkspace, DivergenceError, Hyperparams,
                     SolverState, init_solver, load_checkpoint, objective, process_chunk,
                     process_chunk_variant_c, rank_features, run_stream, save_checkpoint,
                     select_features, update_alpha, update_U, update_Ustar, update_V)

__version__ = "0.1.0"
