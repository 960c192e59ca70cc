from eckhaus_kdv.configuration import ExperimentConfiguration
from eckhaus_kdv.pipeline.validation_pipeline import ValidationPipeline

obj = ValidationPipeline(ExperimentConfiguration("validate", "config/validate.yaml"))
obj.run_pipeline()
