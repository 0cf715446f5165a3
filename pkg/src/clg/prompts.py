"""Prompt templates for the LLM case-selection and rule-decision agents.

Template text is byte-exact, including line breaks and trailing spaces,
because rendered prompts are golden-file tested; edit with care. Each
template bundles a system prompt, a short demonstration conversation, and
a per-item body with named placeholders that are substituted exactly once
per render.

The toxicity case-selection body is a reconstruction by analogy with the
moderation one (post/rating wording); the demonstration pairs are
original to this project.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

# --- system prompts ---------------------------------------------------------

MOD_CASE_SYSTEM = (
    "You are an AI assistant that is assisting a moderator analyze \n"
    "comments posted in an online community. \n"
    "\n"
    "For each comment you are analyzing, you will be shown past \n"
    "comments that the moderator has either removed or kept.\n"
    "\n"
    "Your task is to decide whether the decision on each of the \n"
    "past comments would be relevant to the new comment.\n"
    "\n"
    "A relevant decision is a decision where the new comment \n"
    "exhibits some similarities to the past comment.\n"
    "Think step by step.\n"
)

MOD_RULE_SYSTEM = (
    "You are an AI assistant that is assisting a moderator analyze \n"
    "comments posted in an online community. \n"
    "\n"
    "The moderator will provide a list of rules that posts and \n"
    "comments in the community must adhere to. \n"
    "\n"
    "Based on the list of rules, you should analyze the comment, \n"
    "and respond with either \"keep\" or \"remove\".\n"
    "Think step by step.\n"
)

TOXICITY_CASE_SYSTEM = (
    "You are an AI assistant that is assisting a user in organizing\n"
    "their online feed by rating whether content is toxic or not. \n"
    "\n"
    "For each post in the feed, you will be shown past posts that \n"
    "the user has rated toxicity for on a scale from 1 to 5.\n"
    "\n"
    "Your task is to decide whether the toxicity rating of the \n"
    "past post would be relevant to the new post.\n"
    "\n"
    "A relevant rating is a rating where the new post exhibits \n"
    "some similarities to the past post.\n"
    "Think step by step.\n"
)

TOXICITY_RULE_SYSTEM = (
    "You are an AI assistant that is assisting a user in \n"
    "organizing their online feed by identifying whether content \n"
    "is toxic or not.\n"
    "\n"
    "The user will provide a list of indicators of what content is \n"
    "commonly toxic.\n"
    "\n"
    "Based on the list, you should analyze the content, and \n"
    "respond with a number between 1 and 5, with 1 indicating \n"
    "the content is not toxic at all, and 5 indicating that the\n"
    "content is extremely toxic.\n"
    "Think step by step.\n"
)

# --- per-item bodies --------------------------------------------------------

MOD_CASE_ITEM = (
    "The comment you are analyzing is:\n"
    "{input}\n"
    "\n"
    "The moderator has judged the following \n"
    "similar comment in the past:\n"
    "{precedent}\n"
    "\n"
    "The moderator made a decision of \"{decision}\".\n"
    "Answer with \"relevant\" if the past comment should \n"
    "be considered in the decision for the new comment, or \n"
    "\"not relevant\" if it should not.\n"
)

# reconstructed: mirrors MOD_CASE_ITEM with post/rating wording
TOXICITY_CASE_ITEM = (
    "The post you are analyzing is:\n"
    "{input}\n"
    "\n"
    "The user has rated the following \n"
    "similar post in the past:\n"
    "{precedent}\n"
    "\n"
    "The user gave a toxicity rating of \"{decision}\".\n"
    "Answer with \"relevant\" if the past post should \n"
    "be considered in the rating for the new post, or \n"
    "\"not relevant\" if it should not.\n"
)

RULE_ITEM = (
    "Below are a list of guidelines for making your decision:\n"
    "\n"
    "{instructions}\n"
    "\n"
    "The content you are deciding is:\n"
    "{input}\n"
    "\n"
    "Assess whether each rule applies, and then make your\n"
    "final decision.\n"
    "Think step by step.\n"
)


@dataclass(frozen=True)
class PromptTemplate:
    """A system prompt, demonstration pairs, and a per-item body."""

    system: str
    examples: tuple[tuple[str, str], ...]
    per_item: str

    def placeholders(self) -> tuple[str, ...]:
        return tuple(
            name for _, name, _, _ in string.Formatter().parse(self.per_item) if name is not None
        )

    def render(self, **fields: str) -> str:
        """Substitute every placeholder exactly once; output is byte-stable."""
        names = self.placeholders()
        if sorted(names) != sorted(set(names)):
            raise ValueError("template repeats a placeholder")
        if set(fields) != set(names):
            raise ValueError(f"template expects fields {sorted(set(names))}, got {sorted(fields)}")
        return self.per_item.format(**fields)

    def messages(self, **fields: str) -> list[dict[str, str]]:
        """Full chat message list: system, demonstrations, then the item."""
        msgs = [{"role": "system", "content": self.system}]
        for user, assistant in self.examples:
            msgs.append({"role": "user", "content": user})
            msgs.append({"role": "assistant", "content": assistant})
        msgs.append({"role": "user", "content": self.render(**fields)})
        return msgs


# --- demonstration conversations (original content) --------------------------

_MOD_CASE_DEMO = (
    MOD_CASE_ITEM.format(
        input="This update is garbage and anyone defending it is a paid shill.",
        precedent="Only an idiot would still play after this patch.",
        decision="remove",
    ),
    "Let me compare the two comments step by step.\n"
    "First, the subject: both react to a change in the game and express "
    "strong negative opinions about it.\n"
    "Second, the target: the past comment insults other players, and the "
    "new comment likewise attacks people who disagree rather than the "
    "update itself.\n"
    "The circumstances that led to the removal are present in the new "
    "comment as well, so the past decision should be considered.\n"
    "relevant",
)

_TOXICITY_CASE_DEMO = (
    TOXICITY_CASE_ITEM.format(
        input="Nobody wants you here, just log off forever.",
        precedent="You are the worst kind of person, everyone is laughing at you.",
        decision="4",
    ),
    "Let me compare the two posts step by step.\n"
    "First, the form: both address a specific person directly rather than "
    "discussing a topic.\n"
    "Second, the content: the past post demeans its target, and the new "
    "post tells its target to leave, which is a comparable personal "
    "attack.\n"
    "The new post exhibits the similarities that drove the past rating, "
    "so that rating should be considered.\n"
    "relevant",
)

_MOD_RULE_DEMO = (
    RULE_ITEM.format(
        instructions="1. Be respectful to other members.\n"
        "2. No advertising or self-promotion.\n"
        "3. Posts must be on topic.",
        input="Check out my store for cheap jerseys, link in my profile!",
    ),
    "Let me assess each rule step by step.\n"
    "Rule one, be respectful: the comment is not hostile toward anyone, "
    "so this rule does not apply.\n"
    "Rule two, no advertising: the comment promotes a store and directs "
    "readers to a link, so this rule applies.\n"
    "Rule three, on topic: the comment is unrelated to the discussion, "
    "so this rule also applies.\n"
    "Two rules are violated.\n"
    "Final decision: remove",
)

_TOXICITY_RULE_DEMO = (
    RULE_ITEM.format(
        instructions="1. Insults or demeaning language directed at a person.\n"
        "2. Threats of harm.\n"
        "3. Profanity used aggressively.",
        input="That idea is pretty weak, I expected better from this thread.",
    ),
    "Let me assess each indicator step by step.\n"
    "Indicator one, insults directed at a person: the post criticizes an "
    "idea, not a person, so this barely registers.\n"
    "Indicator two, threats: there is no threat of any kind.\n"
    "Indicator three, aggressive profanity: there is no profanity.\n"
    "The post is dismissive but not directed at a person, so it sits near "
    "the bottom of the scale.\n"
    "Final rating: 2",
)


MOD_CASE_TEMPLATE = PromptTemplate(
    system=MOD_CASE_SYSTEM, examples=(_MOD_CASE_DEMO,), per_item=MOD_CASE_ITEM
)
MOD_RULE_TEMPLATE = PromptTemplate(
    system=MOD_RULE_SYSTEM, examples=(_MOD_RULE_DEMO,), per_item=RULE_ITEM
)
TOXICITY_CASE_TEMPLATE = PromptTemplate(
    system=TOXICITY_CASE_SYSTEM, examples=(_TOXICITY_CASE_DEMO,), per_item=TOXICITY_CASE_ITEM
)
TOXICITY_RULE_TEMPLATE = PromptTemplate(
    system=TOXICITY_RULE_SYSTEM, examples=(_TOXICITY_RULE_DEMO,), per_item=RULE_ITEM
)


def case_template(domain: str) -> PromptTemplate:
    return MOD_CASE_TEMPLATE if domain == "mod" else TOXICITY_CASE_TEMPLATE


def rule_template(domain: str) -> PromptTemplate:
    return MOD_RULE_TEMPLATE if domain == "mod" else TOXICITY_RULE_TEMPLATE
