"""Prompt templates for the three signal-acquisition tasks.

Placeholders are literal brace tokens substituted with str.replace (the
templates contain JSON braces, so str.format is deliberately avoided).
tests/golden/ carries byte-for-byte copies of every template; the test suite
fails on any drift between these constants and the golden files.
"""

from __future__ import annotations

__all__ = [
    "CAPTION_SYSTEM",
    "CAPTION_USER",
    "EXTRACTION_TEMPLATE",
    "EXTRACTION_TEMPLATE_DETAILED",
    "ANNOTATION_STRUCTURED_TEMPLATE",
    "ANNOTATION_YES_NO_TEMPLATE",
    "ANNOTATION_MOLMO_TEMPLATE",
    "render_extraction",
    "render_extraction_detailed",
    "render_annotation_structured",
    "render_annotation_yes_no",
    "render_annotation_molmo",
]

CAPTION_SYSTEM = "You are a helpful assistant for generating image captions.\n"

CAPTION_USER = """Please describe this image 5 times based on the following format.
The input image is provided as a base64-encoded JPEG string.

Output template:
"A black line drawing of {{text1}} on a white background."
OR
"A simple drawing of {{text1}} on a white background."

Instructions:
- Replace {{text1}} with a detailed description of the image.
- Avoid vague descriptions; focus on clear details such as objects, shapes, and actions.
- The fourth and fifth descriptions must focus on unexplained details in the other descriptions, except for the main object.
- Do not include "{{}}" in the final output.
- Choose the appropriate template based on the complexity of the image.
- Separate each description with \\n\\n.
- Do not put any numbers or symbols in front of the descriptions.
- Do not use commas (",").
"""

EXTRACTION_TEMPLATE = """You are a Structured Visual Object Analyzer for sketches.
Your job is to output a single JSON object describing the visible parts of a sketched object class.

Hard rules (follow strictly):

1. No environment-only items.
   Do not include background or scene items that are not intrinsic parts of the object (e.g., no clouds for sun, no road or buildings for car).

2. Visible-only.
   Include only parts plausibly visible in a typical sketch; exclude hidden internals (e.g., car engine, phone mainboard).

3. Variants allowed, naming rules apply.
   Common sketch variants replacing or decorating real parts may be included with "optional": true (e.g., human_mouth on an insect).
   Do not use the word "stylized"; do not use parentheses or brackets.
   All names must be in snake_case (lowercase, digits allowed, words separated by a single underscore).
   Examples: steam_lines, wing_vein_lines, tail_fan, human_mouth.

4. Expressive lines/effects.
   Expressive effects (e.g., airflow_lines, motion_lines, steam_lines, sparkle) are excluded by default.
   They may be included only when they represent an essential and commonly used feature of the object's sketch and must then be marked "optional": true.
   Background-only elements (ground, sky, clouds, water, etc.) must still be excluded.

5. Merge symmetric or duplicated parts.
   Merge symmetric repeats (e.g., left/right wheels, pairs of legs) into a single element (e.g., wheels, legs).

6. Coverage and granularity.
   Produce a rich but concise set of features (recommended 9-16 elements).
   Prefer coarse-to-mid granularity: split obvious appendages or facial parts (head, arms, legs) instead of using a single body.
   Consider including elements from:
   (a) anatomy or core shape,
   (b) facial features,
   (c) iconic clothing or accessories,
   (d) explicit surface, texture, or pattern marks (e.g., seed_dots, peel_lines, feather_lines, shell_pattern, fur_lines),
   (e) expressive lines only if visibly drawn.

7. Ground truth first, then variants.
   List physically correct parts first, then common variants or expressive features with "optional": true.

8. Labelability and non-ambiguous features.
   Every feature must be binary labelable (0/1) from the sketch without subjective judgment.
   Disallow vague descriptors (e.g., smooth_surface, shiny_surface).
   Do not describe the absence of texture (e.g., no_texture).
   Prefer positive, observable evidence (lines, dots, edges, explicit patterns), such as glaze_lines, seed_dots, crack_lines, slice_lines.

Output format (exact structure):
{
  "class": "<object_name>",
  "total_elements": <int>,
  "elements": [
    {
      "id": "<class_name>.<part_name>",
      "name": "<part_name>",
      "optional": <true or false>
    },
    ...
  ]
}

Additional guidance:
- "total_elements" must equal the number of objects in "elements".
- Output JSON only (no commentary outside the JSON).
- <part_name> must be snake_case; IDs must be of the form <class_name>.<part_name>.
- Ensure at least 8 elements (prefer 9-16) and reasonable coverage of anatomy, facial features, accessories, surface or pattern, and expressive lines.
- Ensure all features are 0/1 labelable and not environment-only.

Final instruction: Now, provide the structured JSON for the following object: {word}.
"""

EXTRACTION_TEMPLATE_DETAILED = """You are a sketch analysis expert. Your task is to extract a structured list of common visual elements that are typically included - or semantically expected - when humans sketch a given object class.

Use the object class name, along with general visual common sense and knowledge of object structure, to infer as many relevant visual components as possible.

Your goal is to produce a comprehensive and fine-grained breakdown of visual parts, including:
- core parts,
- minor or optional parts,
- functional attachments,
- repeated units,
- motion-related components (e.g., rotating blades, walking legs),
- relevant environmental or contextual elements.

Even if a part is rarely drawn, include it if it is semantically meaningful or distinctive for understanding or sketching the object, and assign lower importance_score accordingly.

This output will be used to build a commonsense database for sketch abstraction, so prioritize coverage and interpretability.

For each visual element, return the following fields:
- id: in the form <class>.<element_name>
- name: the name of the part
- shape: geometric form (e.g., circle, triangle, curve)
- position: typical relative location in the object
- count: usual number (e.g., 1, 2, or "varies")
- importance_score: integer from 1 to 5 (5 = essential; 1 = optional or rare)
- optional: true or false
- description: what it looks like and why it is relevant

Return the result strictly in the following structure:
{
  "class": "{class_name}",
  "total_elements": <number_of_elements>,
  "elements": [
    ...
  ]
}

Important general rules:
- Do not include color information.
- Do not include fictional or humorous features.
- Do not include decorative elements unless they are functionally or culturally tied to the class.
- Use consistent, interpretable IDs in the format <class>.<element_name>.
- Include both (1) frequently drawn elements and (2) structurally important elements even if rarely drawn.
- Include context or environment features only if they are logically essential to how the object is typically depicted.
- Think about what makes this class visually different from nearby classes and reflect that in part selection.
- Favor over-inclusion: include more elements with appropriately scaled importance_score.

Class: {class_name}
"""

ANNOTATION_STRUCTURED_TEMPLATE = """<|image|>
You are a strict vision auditor for sketched objects.
Target class: "{class_name}".
Valid elements for this class (use only these ids; do not add new keys):
{element_block}
Task: For each element id above, return only whether the element is depicted (true/false).
Do not return counts. If ambiguous, use false.
Return only a compact JSON object with element ids as keys and boolean values (true/false).
No prose, no code block, no extra keys.
Example schema (structure only):
{
  "element_id_1": true,
  "element_id_2": false,
  ...
}
"""

ANNOTATION_YES_NO_TEMPLATE = """In this {class_name} image, does this sketch contain a {e}?
Answer exactly "yes" or "no".
"""

ANNOTATION_MOLMO_TEMPLATE = """You are an assistant that analyzes an image of a {category} and answers in JSON format only.

Task: For the given {category} image, decide if each of the following elements is present (1) or not present (0):
[{element_list}].

Return the result strictly as a JSON object in the following format:
{
  "{file_name}": {
    {element_lines}
  }
}
Do not include explanations or extra text. Output only valid JSON.
"""


def render_extraction(class_name: str) -> str:
    return EXTRACTION_TEMPLATE.replace("{word}", class_name)


def render_extraction_detailed(class_name: str) -> str:
    return EXTRACTION_TEMPLATE_DETAILED.replace("{class_name}", class_name)


def render_annotation_structured(class_name: str, element_ids: list[str]) -> str:
    block = "\n".join(element_ids)
    return (ANNOTATION_STRUCTURED_TEMPLATE
            .replace("{class_name}", class_name)
            .replace("{element_block}", block))


def render_annotation_yes_no(class_name: str, element_name: str) -> str:
    return (ANNOTATION_YES_NO_TEMPLATE
            .replace("{class_name}", class_name)
            .replace("{e}", element_name))


def render_annotation_molmo(category: str, element_names: list[str], file_name: str) -> str:
    element_list = ", ".join(element_names)
    element_lines = ",\n    ".join(f'"{name}": <0 or 1>' for name in element_names)
    return (ANNOTATION_MOLMO_TEMPLATE
            .replace("{category}", category)
            .replace("{element_list}", element_list)
            .replace("{file_name}", file_name)
            .replace("{element_lines}", element_lines))
