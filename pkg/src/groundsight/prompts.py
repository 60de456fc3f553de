"""Prompt templates for the answerer, the ROI summarizer, and the judge.

Every string here is part of the observable behavior: transcripts and the
golden-prompt tests pin these bytes exactly. Do not reflow or "fix" the
wording.
"""

from __future__ import annotations

AGENT_SYSTEM_PROMPT = (
    "You are a precise and cautious assistant that truthfully answers user "
    "questions about the provided image augmented with online search "
    "information. Only answer if you are confident and have the necessary "
    "knowledge. If you are not absolutely certain about the answer, reply "
    "with exactly: 'I don't know', without any further explanation. Do not "
    "use any other phrases like 'I don't have details', 'It depends', or 'I "
    "don't have enough information'. Your response must be concise and must "
    "not exceed 75 words."
)

COS_SYSTEM_PROMPT = (
    "You are a helpful assistant that can summarize a region of interest of "
    "the image based on user's question. The summary should be concise and "
    "only contain a simple description that must not exceed 10 words. The "
    "summary must not answer the question."
)

JUDGE_SYSTEM_PROMPT = (
    "You are an expert evaluator for question answering systems. "
    "Your task is to determine if a prediction correctly answers a question "
    "based on the ground truth.\n\n"
    "Rules:\n"
    "1. The prediction is correct if it captures all the key information "
    "from the ground truth.\n"
    "2. The prediction is correct even if phrased differently as long as "
    "the meaning is the same.\n"
    "3. The prediction is incorrect if it contains incorrect information or "
    "is missing essential details.\n"
    "Output a JSON object with a single field 'accuracy' whose value is "
    "true or false."
)

# Prefix used to inject the ROI summary into the final answer prompt.
ROI_PREFIX = "Region of interest: "


def assemble_agent_prompt(search_context: str, query: str) -> tuple[str, str]:
    """Final-answer prompt pair.

    search_context is the rendered entity block; callers pass "" when
    retrieval produced nothing, and the rendered block plus a trailing
    newline otherwise, so the question always starts a line.
    """
    user = (
        "Context that may be relevant to the objects in question:\n"
        + search_context
        + "Answer this question: "
        + query
    )
    return AGENT_SYSTEM_PROMPT, user


def assemble_cos_prompt(query: str) -> tuple[str, str]:
    """Region-of-interest summarization prompt pair; query is single-quoted."""
    user = (
        "Provide a concise summary for object of interest that can answer "
        "the following question: '" + query + "'"
    )
    return COS_SYSTEM_PROMPT, user


def prepend_roi_summary(user_prompt: str, summary: str) -> str:
    """Prepend the ROI summary line to an assembled agent user prompt."""
    return ROI_PREFIX + summary + "\n" + user_prompt
