__version__ = '0.1.0'

import torch
torch.set_default_dtype(torch.float64)
from .verdict import (TermOfImprisonment, TermBins, Verdict, CaseRecord, LabelSet, bin_term,
                      get_term_bins, label_set, verdict_matches, load_corpus)
from .embedding import HashEmbedder, RemoteEmbedder, make_embedder, cosine, normalize
from .statutes import Statute, StatuteLibrary, load_statutes, search_statutes
from .archive import StandardsArchive, StandardNode, FailureBuffer
from .directives import DirectiveBase, Directive, Outcome
from .retrieval import RetrievalWeights, RetrievalSettings, retrieve_standards, retrieve_directives, score
from .prompts import AgentRole, assemble_prompt
from .backends import ScriptedBackend, SimulatedBackend, RemoteBackend, invoke, make_backends
from .workflow import PanelConfig, CaseResult, FinalFlag, run_case
from .evolution import EvolutionConfig, run_cycle, maybe_trigger
from .alignment import build_alignment_data
from .metrics import evaluate, format_report
from .config import RunConfig, load_config, save_config
from .runner import run_inference
from . import exceptions
