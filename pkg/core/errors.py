"""
Exception hierarchy for TreeReply
"""


class TreeReplyError(Exception):
    """Base class for every error raised by TreeReply"""


class TreeStructureError(TreeReplyError):
    """Head links do not form a single-rooted tree"""


class NonProjectiveError(TreeStructureError):
    """In-order traversal cannot reproduce the surface order"""


class TreeInvariantError(TreeReplyError):
    """A tree violates a node-level invariant (tag range, padding)"""


class MalformedTreeError(TreeReplyError):
    """Input cannot be read back as a tree"""


class EnumerationLimitError(TreeReplyError):
    """Exhaustive enumeration was asked for a size beyond the cap"""


class CorpusError(TreeReplyError):
    """File-level ingestion failure"""


class ModelError(TreeReplyError):
    """Bad token index, dimension mismatch or corrupt checkpoint"""


class SearchError(TreeReplyError):
    """Beam state score drifted from the recomputed likelihood"""


class ConfigError(TreeReplyError):
    """Invalid or unknown configuration value"""
