from .propagation import LossDiagram, PropagationField, loss_at, loss_between, render_diagram

__all__ = ['LossDiagram', 'PropagationField', 'loss_at', 'loss_between', 'render_diagram']
