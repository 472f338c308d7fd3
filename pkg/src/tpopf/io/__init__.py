"""File formats, PF-replay verification and result documents."""

from .network_io import (
    FORMAT_VERSION,
    NETWORK_SCHEMA,
    NetworkFormatError,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
    schema_errors,
)
from .results import (
    canonical_json,
    config_hash,
    network_digest,
    result_document,
    solution_from_document,
    solution_payload,
    versions,
    write_iteration_log,
    write_json,
    write_pf_csv,
    write_production_csv,
)
from .verify import ErrorReport, ErrorStats, ReplayDiverged, replay_voltages, sample_errors, verify_against_pf
