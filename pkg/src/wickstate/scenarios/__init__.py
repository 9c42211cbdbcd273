"""Bundled scenario files, loaded through wickstate.core.registry."""
