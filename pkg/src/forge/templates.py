"""Prompt template bodies, transcribed byte-for-byte from the source tables.

Do not reflow, "fix", or re-wrap these strings: downstream tests compare them
against golden files byte-for-byte, and the perplexity conditioning context is
defined as the no-input following template up to and including the newline
after "### Response:". The with-input following template really does read
"context.Write" with no space; that is faithful to the source.

Slot markers are literal: generation templates use "<corpus_example>", the
following/extraction templates use "{{ instruction }}" and "{{input}}".
"""

from __future__ import annotations

from enum import Enum

CORPUS_SLOT = "<corpus_example>"
INSTRUCTION_SLOT = "{{ instruction }}"
INPUT_SLOT = "{{input}}"

GENERATION_INSTRUCTION_ANSWER = (
    "Instruction: X\n"
    "Output: <corpus_example>\n"
    "What kind of instruction could this be the answer to?\n"
    "X:"
)

GENERATION_CHATBOT = (
    "You are a chatbot. A user sent you an informal message and your reply is as follows.\n"
    "Message: X\n"
    "Reply: <corpus_example>\n"
    "What is the informal message X?\n"
    "X:"
)

GENERATION_SEARCH_QUERY = (
    "You are a search engine. A person queried something in detail and the most relevant document about the query is as follows.\n"
    "Query: X\n"
    "Document: <corpus_example>\n"
    "What is the detailed query X?\n"
    "X:"
)

FOLLOWING_WITH_INPUT = (
    "Below is an instruction that describes a task, paired with an input that provides further context."
    "Write a response that appropriately completes the request.\n"
    "\n"
    "### Instruction:\n"
    "{{ instruction }}\n"
    "\n"
    "### Input:\n"
    "{{input}}\n"
    "\n"
    "### Response:\n"
)

FOLLOWING_WITHOUT_INPUT = (
    "Below is an instruction that describes a task. "
    "Write a response that appropriately completes the request.\n"
    "\n"
    "### Instruction:\n"
    "{{ instruction }}\n"
    "\n"
    "### Response:\n"
)

EXTRACTION_PROMPT = (
    "Below is an instruction that describes a task, paired with an input that provides further context. "
    "Write a response that appropriately completes the request.\n"
    "\n"
    "### Instruction:\n"
    "Select key segments from the given article below.\n"
    "\n"
    "### Input:\n"
    "{{input}}\n"
    "\n"
    "### Response:\n"
)


class GenerationStyle(str, Enum):
    """The three instruction-generation prompt styles."""

    instruction_answer = "instruction_answer"
    chatbot = "chatbot"
    search_query = "search_query"


GENERATION_BODIES: dict[GenerationStyle, str] = {
    GenerationStyle.instruction_answer: GENERATION_INSTRUCTION_ANSWER,
    GenerationStyle.chatbot: GENERATION_CHATBOT,
    GenerationStyle.search_query: GENERATION_SEARCH_QUERY,
}


def fill_corpus_slot(template: str, text: str) -> str:
    return template.replace(CORPUS_SLOT, text)


def fill_following_slots(template: str, instruction: str, input_text: str | None = None) -> str:
    rendered = template.replace(INSTRUCTION_SLOT, instruction)
    if input_text is not None:
        rendered = rendered.replace(INPUT_SLOT, input_text)
    return rendered
