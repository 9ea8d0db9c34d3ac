# Report emission package
from lab.reporting.writer import ReportWriter, report_frame

__all__ = ["ReportWriter", "report_frame"]
