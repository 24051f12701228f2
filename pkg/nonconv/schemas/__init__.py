from nonconv.schemas.experiment import ExperimentConfig
from nonconv.schemas.function import FunctionDescription, HolderMetadata
from nonconv.schemas.process import ProcessDescription
from nonconv.schemas.reports import SuiteReport
