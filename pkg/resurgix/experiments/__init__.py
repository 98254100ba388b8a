"""Sacred experiment sweeps. Observers are attached only when RESURGIX_SACRED_DIR is set."""
import logging
import os

from sacred.observers import FileStorageObserver


def attach_observers(ex):
    """Stores runs under $RESURGIX_SACRED_DIR/<experiment name> when the variable is set."""
    directory = os.environ.get('RESURGIX_SACRED_DIR')
    if directory:
        ex.observers.append(FileStorageObserver(os.path.join(directory, ex.path)))
        logging.info(f"Recording {ex.path} runs in {directory}")
    return ex
