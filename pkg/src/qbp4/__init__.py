"""Refined BP4 and neural BP4 decoding of quantum LDPC codes on
overcomplete check matrices."""
from .codes import (CheckMatrix, CssCode, NormalizerMatrix, StabilizerCode, bch_713, build_gb_code,
                    check_logical_equivalence, compute_normalizer, compute_syndrome, load_code,
                    to_quaternary, validate_css)
from .decoder import DecoderGraph, NbpWeights, decode, decode_batch, init_priors
from .estimators import BP4Decoder, NeuralBP4Decoder, SyndromeMapper
from .overcomplete import (OvercompleteCheckMatrix, SearchEffort, assemble_overcomplete,
                           find_low_weight_rows, generate_overcomplete, map_syndrome)

__all__ = [
    "CheckMatrix", "CssCode", "NormalizerMatrix", "StabilizerCode", "bch_713", "build_gb_code",
    "check_logical_equivalence", "compute_normalizer", "compute_syndrome", "load_code",
    "to_quaternary", "validate_css", "DecoderGraph", "NbpWeights", "decode", "decode_batch",
    "init_priors", "BP4Decoder", "NeuralBP4Decoder", "SyndromeMapper", "OvercompleteCheckMatrix",
    "SearchEffort", "assemble_overcomplete", "find_low_weight_rows", "generate_overcomplete",
    "map_syndrome",
]
