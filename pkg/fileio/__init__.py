# fileio/__init__.py

from .file_manager import (
    read_market_table,
    load_zero_curve,
    load_cds_quotes,
    load_forward_curve,
    load_atm_vols,
    load_reference_cva,
    read_file_async,
    write_file_async,
    write_files_async,
    frame_to_csv,
    results_to_frame,
    results_to_csv,
    read_results_csv,
    state_to_dict,
    state_from_dict,
    state_to_json,
    load_state,
    state_fingerprint,
)
