"""
Read-eval loop for TreeReply
"""

import sys
from typing import Optional, TextIO

from core.search import generate_response

QUIT_WORDS = {"quit", "exit", ":q"}


class ChatDemo:
    """Reads a post per line and prints the best response"""

    def __init__(self, model, vocabulary, global_beam: int = 6, local_beam: int = 6, node_cap: int = 64):
        self.model = model
        self.vocabulary = vocabulary
        self.global_beam = global_beam
        self.local_beam = local_beam
        self.node_cap = node_cap

    def reply(self, post: str) -> Optional[str]:
        responses = generate_response(post.split(), self.model, self.vocabulary,
                                      self.global_beam, self.local_beam, self.node_cap)
        return responses[0][0] if responses else None

    def run(self, stream_in: Optional[TextIO] = None, stream_out: Optional[TextIO] = None):
        stream_in = stream_in or sys.stdin
        stream_out = stream_out or sys.stdout
        print("TreeReply chat demo. Type 'quit' to leave.", file=stream_out)
        while True:
            print("> ", end="", file=stream_out, flush=True)
            line = stream_in.readline()
            if not line:
                break
            post = line.strip()
            if not post:
                continue
            if post.lower() in QUIT_WORDS:
                break
            response = self.reply(post)
            print(response if response is not None else "(no response)", file=stream_out)
        print("", file=stream_out)
