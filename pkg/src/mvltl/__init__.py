"""Minimum-violation LTL planning and reach-avoid control."""
