"""Python bindings for the living-lab evaluation core."""

from ._core import (
    Corpus,
    NotFound,
    StateError,
    SystemUnavailable,
    ValidationError,
    assign_credit,
    derive_seed,
    format_report,
    generate_site,
    rank,
    replay_report,
    run_campaign,
    score_bm25,
    sign_test,
    simulate_clicks,
    team_draft_interleave,
    tokenize,
)

__all__ = [
    "Corpus",
    "NotFound",
    "StateError",
    "SystemUnavailable",
    "ValidationError",
    "assign_credit",
    "derive_seed",
    "format_report",
    "generate_site",
    "rank",
    "replay_report",
    "run_campaign",
    "score_bm25",
    "sign_test",
    "simulate_clicks",
    "team_draft_interleave",
    "tokenize",
]
