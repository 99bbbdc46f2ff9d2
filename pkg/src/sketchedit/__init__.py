"""sketchedit: interpret natural-language + sketch video edit commands.

The package turns a multimodal edit command (free text plus an optional
rectangle sketched on a frame) into concrete, adjustable edit suggestions:
which operation to apply, when in the video, where in the frame, and with
which parameters. It also ships the editing-state engine (layers, suggestion
lifecycle, undo, EDL export), a metrics harness, an HTTP service, and a CLI.
"""

__version__ = "0.1.0"
