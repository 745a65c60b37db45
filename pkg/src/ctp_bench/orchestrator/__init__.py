from .logs import EncoderSummary, parse_encoder_log
from .plan import ExperimentPlan, MeasurementSpec, SequenceSpec, ToolSpec, load_plan, plan_from_dict
from .runner import PlanRunner, RunSummary, encoding_time_ratio, meter_factory, run_plan
from .store import JobRecord, ResultsStore

__all__ = [
    "EncoderSummary", "ExperimentPlan", "JobRecord", "MeasurementSpec", "PlanRunner", "ResultsStore",
    "RunSummary", "SequenceSpec", "ToolSpec", "encoding_time_ratio", "load_plan", "meter_factory",
    "parse_encoder_log", "plan_from_dict", "run_plan",
]
