# docs/__init__.py

from .report_generator import (
    CREDIT,
    OIL,
    VOL_TERM_STRUCTURE,
    split_by_kind,
    table_frame,
    render_markdown_table,
    vol_term_structure_frame,
    render_vol_markdown,
    render_report,
)
from .deviation_report import (
    DEVIATION_BANDS,
    DEVIATION_FILE,
    anchor_factors,
    deviation_frame,
    monotonicity_violations,
    render_deviation_report,
)
