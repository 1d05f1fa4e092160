class ResourceError(RuntimeError):
    """An enumeration or search exceeded its configured size cap."""
