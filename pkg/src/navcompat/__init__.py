"""Instruction-trajectory compatibility workbench for panoramic navigation graphs."""

__version__ = "0.1.0"
