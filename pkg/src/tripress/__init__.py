"""Distributed dictionary encoding for RDF N-Triples / N-Quads."""
from .errors import (ConfigError, ConsistencyError, CorruptDataError, CorruptDictionaryError, ParseError,
                     ProtocolError, TransportError, TripressError)
from .kernels import IMPLEMENTATION as KERNELS
from .orchestrator import RunConfig, RunReport, run_encoding, run_transactional, run_update
from .terms import destination, partition_hash

__version__ = "0.1.0"
