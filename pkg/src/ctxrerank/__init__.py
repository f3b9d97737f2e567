"""Contextual transformer re-ranking with history-aware attention, in numpy."""
