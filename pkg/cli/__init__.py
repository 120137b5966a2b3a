from .commands import build_parser, cmd_compare, cmd_diagram, cmd_quantize, cmd_run, cmd_solve, main
from .manifest import RunManifest

__all__ = [
    'build_parser',
    'cmd_compare',
    'cmd_diagram',
    'cmd_quantize',
    'cmd_run',
    'cmd_solve',
    'main',
    'RunManifest',
]
