"""Streaming simulator and analysis toolkit for certifying the
entanglement length of a photonic linear-cluster source.

Pipeline: ``simulate`` emits a click record, ``scan`` mines it for
basis-pattern matches whose outcome products estimate stabilizer
correlators, and the analysis layer turns those estimates into certified
entanglement bounds, fitted error rates, and an extrapolated
entanglement length.
"""
from .analysis import (DetectorLayout, ErrorModelFit, LEBoundRow,
                       LEBoundTable, TwoQubitMoments, XiEstimate,
                       concurrence, direct_bounds, eof, eof_from_concurrence,
                       fit_error_model, instance_probability,
                       max_direct_length, naive_tomography_K,
                       optimal_instance_probability, optimal_pp,
                       predict_gamma, predicted_template_mean,
                       rho_tilde_eigenvalues, splitter_settings, xi_e,
                       xi_from_rates)
from .config import ConfigError, RunConfig, parse_config, read_config
from .pauli import FrameError, PauliLetter, PauliString, StabilizerFrame
from .recordio import (ClickRecord, RecordFormatError, encode_event,
                       event_basis, event_outcome, open_record, read_record,
                       write_record)
from .stream import ExperimentConfig, apply_noise_step, simulate
from .templates import (CorrelatorEstimate, Template, TemplateFamily,
                        TemplateVerificationError, certifiable_lengths,
                        make_gamma1, make_gamma2, make_template, scan,
                        template_k_product, verify_template,
                        verify_template_algebra, verify_template_stream,
                        zz_flip_pair_count)

__version__ = "0.1.0"

__all__ = [
    "ClickRecord", "ConfigError", "CorrelatorEstimate", "DetectorLayout",
    "ErrorModelFit", "ExperimentConfig", "FrameError", "LEBoundRow",
    "LEBoundTable", "PauliLetter", "PauliString", "RecordFormatError",
    "RunConfig", "StabilizerFrame", "Template", "TemplateFamily",
    "TemplateVerificationError", "TwoQubitMoments", "XiEstimate",
    "apply_noise_step", "certifiable_lengths", "concurrence",
    "direct_bounds", "encode_event", "eof", "eof_from_concurrence",
    "event_basis", "event_outcome", "fit_error_model",
    "instance_probability", "make_gamma1", "make_gamma2", "make_template",
    "max_direct_length", "naive_tomography_K", "open_record",
    "optimal_instance_probability", "optimal_pp", "parse_config",
    "predict_gamma", "predicted_template_mean", "read_config",
    "read_record", "rho_tilde_eigenvalues", "scan", "simulate",
    "splitter_settings", "template_k_product", "verify_template",
    "verify_template_algebra", "verify_template_stream",
    "write_record", "xi_e", "xi_from_rates", "zz_flip_pair_count",
]
