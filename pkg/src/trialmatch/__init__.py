"""Clinical-trial matching workbench.

Pipeline stages (retrieval, matching, ranking), a Boolean keyword-search
baseline, evaluation metrics over human eligibility/benefit labels, and an
adjudication service for collecting those labels.
"""

__version__ = "0.1.0"
