"""Coordinator that drives one repair run from scan to final report."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import time

from .behavior import SequenceModel
from .config import RunConfig
from .const import VARIANT_BLOCK, VARIANT_CRS, VARIANTS
from .core import MultiSeries, RepairReport, RepairStructureError, ReviewEntry
from .determination import candidate_run_report, determine_repairs
from .pipeline import CandidateSchema, block_length, run_block_pipeline, run_pipeline

_LOGGER = logging.getLogger(__name__)


@dataclass
class RepairResult:
    """Everything a repair run produces."""

    report: RepairReport
    repaired: MultiSeries
    candidate: MultiSeries
    schemas: list[CandidateSchema]
    review_queue: list[ReviewEntry]
    models: list[SequenceModel]


class RepairCoordinator:
    """Class to manage repair runs under one configuration.

    The coordinator owns the behavior models. When it starts with models they
    replace the bootstrap fit, and after each streaming run it keeps the final models.
    """

    def __init__(
        self,
        config: RunConfig,
        models: Sequence[SequenceModel] | None = None,
    ) -> None:
        """Initialize the coordinator."""
        self.config = config
        self.models: list[SequenceModel] | None = list(models) if models is not None else None

    def run(self, series: MultiSeries, variant: str | None = None) -> RepairResult:
        """Repair a series with the given variant (default: the configured one)."""
        variant = variant or self.config.variant
        if variant not in VARIANTS:
            raise RepairStructureError(f"Unknown variant: {variant}")

        started = time.perf_counter()
        pipeline_config = self.config.pipeline_config(variant)
        if variant == VARIANT_BLOCK:
            chunk_len = block_length(series.length, self.config.block_lambda)
            scan = run_block_pipeline(series, pipeline_config, chunk_len)
        else:
            scan = run_pipeline(series, pipeline_config, self.models)
            self.models = scan.models

        if variant == VARIANT_CRS:
            report = candidate_run_report(scan.schemas, series.length)
            repaired = scan.candidate
        else:
            repaired, report = determine_repairs(
                scan.schemas, series, self.config.determination_config
            )
        report.review_queue = scan.review_queue
        report.config_echo = {**self.config.as_dict(), "variant": variant}

        _LOGGER.info(
            "%s run over %s rows found %s instances in %.2f s",
            variant,
            series.length,
            len(report.instances),
            time.perf_counter() - started,
        )
        return RepairResult(
            report=report,
            repaired=repaired,
            candidate=scan.candidate,
            schemas=scan.schemas,
            review_queue=scan.review_queue,
            models=scan.models,
        )
