"""Knowledge-aware controller synthesis: ontology to LTL to GR(1) controllers,
with a simulation harness for the stop-sign case study."""

__version__ = "0.1.0"
