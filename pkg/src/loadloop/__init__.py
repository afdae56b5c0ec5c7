"""loadloop: an interactive load-forecasting workbench.

Preparation, guidable model search, and deployment run behind a multi-agent
runtime; an HTTP service and headless CLI expose the same pipeline.
"""

__version__ = "0.1.0"
