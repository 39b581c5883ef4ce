#pragma once

#include <map>
#include <string>
#include <string_view>

#include "simura/core.hpp"
#include "simura/text.hpp"

// Prompt templates for every LLM role, kept as verbatim text assets with
// {named} placeholders. Tests golden-check the section headers and key
// instruction sentences, so edit with care.

namespace simura::prompts {

inline constexpr std::string_view kEncoderTemplate = R"PROMPT(# Observation:
{observation}

# State:
Describe all the elements in the current webpage observation. Note any dialogs, progress indicators, or error messages. Include any interactive elements and their values or if they are blank. Note any detailed information such as facts, entities, or data that are relevant to the task. Report any error messages like whether the last action was correct. Try to be as comprehensive and detailed as possible.

Wrap your response in the tag <state> and </state>.)PROMPT";

inline constexpr std::string_view kPolicyTemplate = R"PROMPT({memory}

# Current State:
{state}

# Intent:
Describe the action the assistant should take next to carry out the user's instruction. Avoid using phrases such as "To accomplish the goal," "I will," "To proceed.". Avoid ending with phrases like "to execute the search." Describe one action at a time and avoid combining multiple steps. Refrain from mentioning specific element IDs as they may change during execution. Limit your response to one phrase and include any details that help select the correct action. Be creative and propose novel methods to achieve the goal. Avoid creating accounts without user permission or providing personal information. Concrete example would be "Go to the home page of Google Flights." and "Click on the 'Search' button."

Wrap your response in the following format:

<think>
Your thoughts and reasoning process
</think>

<intent>
Description of the action to perform next
</intent>)PROMPT";

inline constexpr std::string_view kWorldModelTemplate = R"PROMPT({memory}

# Current State:
{state}

# Memory Update:
{memory_update}

# Action Intent:
{plan}

# Next State:
Describe all the elements in the webpage after the agent attempts to carry out the intent. Note that the execution may not be successful, so you will have to infer the result of the action. Note any dialogs, progress indicators, or error messages. Include any interactive elements and their values or if they are blank. Note any detailed information such as facts, entities, or data that are relevant to the task. Report any error messages displayed. Try to be as comprehensive and detailed as possible.

Wrap your response in the following format:

<next_state>
Follow the format of the current state description. Use present tense. Avoid starting phrases like "Based on the interaction history, current state, and current intent".
</next_state>)PROMPT";

inline constexpr std::string_view kCriticTemplate = R"PROMPT({memory}

# Final State:
{state}

# Task Success and Progress:
Your task is to evaluate the performance of the agent. Given the agent's instruction, interaction history, the final state of the webpage, and the agent's responses to the user if any, your goal is to decide whether the agent's execution is successful or not. If the current state is a failure but it looks like the agent is on the right track towards success, you should also output as such.

Wrap your response in the following format:

<think>
Your thoughts and reasoning process
</think>

<status>
"success" or "failure"
</status>

<on_the_right_track>
"yes" or "no"
</on_the_right_track>)PROMPT";

inline constexpr std::string_view kMemoryUpdateTemplate = R"PROMPT({memory}

# State:
{state}

# Action Intent:
{plan}

# Memory Update:
Summarize the changes in the webpage observation that should be remembered for achieving your goal and for predicting the next state. Note any new elements, any elements no longer visible, or any changes in the content of existing elements. Also note if there is no change. Include any other inferred information that may help you decide the next action, such as whether an action intent is successful, or whether progress has been made or reversed. Do not include your next planned actions. Revise your belief from previous history if the current state contradicts it.

Wrap your response in the tag <memory_update> and </memory_update>.)PROMPT";

inline constexpr std::string_view kActorTemplate = R"PROMPT({memory}

# Observation:
{observation}

# Current State:
{state}

# Current Intent:
{plan}

# Action:
Choose an API call that will carry out the intent when executed in the webpage. Use only one action at a time. You must not enclose bid inputs in [brackets] but instead in 'single quotes'. Interact only with elements in the current step observation. Your response will be executed as a Python function call, so ensure it adheres to the format and argument data type specifications defined in the action space.

Wrap your response in the tag <action> and </action>.)PROMPT";

inline constexpr std::string_view kClusteringTemplate = R"PROMPT(Here is the action space for a browser agent to navigate in a webpage:

16 different types of actions are available:

noop(wait_ms: float = 1000)

send_msg_to_user(text: str)

scroll(delta_x: float, delta_y: float)

fill(bid: str, value: str)

select_option(bid: str, options: str | list[str])

click(bid: str, button: Literal['left', 'middle', 'right'] = 'left', modifiers: list[typing.Literal['Alt', 'Control', 'Meta', 'Shift']] = [])

dblclick(bid: str, button: Literal['left', 'middle', 'right'] = 'left', modifiers: list[typing.Literal['Alt', 'Control', 'Meta', 'Shift']] = [])

hover(bid: str)

press(bid: str, key_comb: str)

focus(bid: str)

clear(bid: str)

drag_and_drop(from_bid: str, to_bid: str)

upload_file(bid: str, file: str | list[str])

go_back()

go_forward()

goto(url: str)

Only a single action can be provided at once. Example:
    fill('a12', 'example with "quotes"')

Below, you will find lists of intents, or natural language descriptions of actions that, when executed, will translate to one of the function calls above. The intents will be provided in the following JSON format:

```json
{
  "intent_id": "intent description"
}
```

Your task is to cluster list of intents into semantically equivalent groups, where each group represents intents that lead to the same action when executed (i.e., navigating to the Google homepage is translated to goto('https://www.google.com')) and would therefore correspond to the same API call in a Playwright browser. Intents that use different wording but convey the same action should be grouped together. Try to minimize the number of clusters.

Represent the clustering results using a JSON object where each cluster has a unique identifier, and each identifier maps to a list of actions in that cluster. See below for an abstract example:

```json
{
  "cluster_id": {
    "intent": "representative intent name for this cluster",
    "candidates": [
      "<list of intent ids that belong to this cluster>
    ]
  }
}
```

Concrete Example 1:

Dictionary of Intents:

```json
{
  "0": "Navigate to the Google homepage by entering its URL.",
  "1": "Go to the Google homepage.",
  "2": "Go to the Google homepage",
  "3": "Go to the Google homepage by navigating to 'https://www.google.com'",
  "4": "Go to the home page of Google"
}
```

Clustering Results:

```json
{
  "cluster_1": {
    "intent": "Navigate to the Google homepage",
    "candidates": [0, 1, 2, 3, 4]
  }
}
```

Concrete Example 2:

Dictionary of Intents:

{action_candidate_json}

Clustering Results:)PROMPT";

// --- builders ---------------------------------------------------------------

inline std::string encoder(const std::string& observation) {
  return fill_template(kEncoderTemplate, {{"observation", observation}});
}

inline std::string policy(const std::string& memory, const std::string& state) {
  return fill_template(kPolicyTemplate, {{"memory", memory}, {"state", state}});
}

inline std::string world_model(const std::string& memory, const std::string& state,
                               const std::string& memory_update, const std::string& plan) {
  return fill_template(kWorldModelTemplate, {{"memory", memory},
                                             {"state", state},
                                             {"memory_update", memory_update},
                                             {"plan", plan}});
}

inline std::string critic(const std::string& memory, const std::string& state) {
  return fill_template(kCriticTemplate, {{"memory", memory}, {"state", state}});
}

inline std::string memory_update(const std::string& memory, const std::string& state,
                                 const std::string& plan) {
  return fill_template(kMemoryUpdateTemplate,
                       {{"memory", memory}, {"state", state}, {"plan", plan}});
}

inline std::string actor(const std::string& memory, const std::string& observation,
                         const std::string& state, const std::string& plan) {
  return fill_template(kActorTemplate, {{"memory", memory},
                                        {"observation", observation},
                                        {"state", state},
                                        {"plan", plan}});
}

inline std::string clustering(const std::string& action_candidate_json) {
  return fill_template(kClusteringTemplate, {{"action_candidate_json", action_candidate_json}});
}

// --- default agent identity --------------------------------------------------

inline constexpr std::string_view kWebAgentDescription =
    R"PROMPT(An information and automation assistant who responds to user instructions by browsing the internet. The assistant strives to answer each question accurately, thoroughly, efficiently, and politely, and to be forthright when it is impossible to answer the question or carry out the instruction. The assistant will end the task once it sends a message to the user.)PROMPT";

inline constexpr std::string_view kWebArenaDescription =
    R"PROMPT(An information and automation assistant that interacts with the browser and responds to user instructions. The response follows the following rules: 1. When the intent is a question, and a complete answer to the question has been found, then send the answer to the user; 2. the intent wants to locate specific information or navigate to a particular section of a site, and the current page satisfies, then stop and tell the user you found the required information; 3. the intent want to conduct an operation, and has been done, then stop and tell the user the operation has been completed.

The assistant should try to achieve the goal in the current site without navigating to sites like Google. Be forthright when it is impossible to answer the question or carry out the task. The assistant will end the task once it sends a message to the user.)PROMPT";

inline constexpr std::string_view kObservationSpaceDoc =
    R"PROMPT(The text representation and screenshot of the part of webpage visible in the viewport of a browser. Here is an abstract description of the information available in the webpage text representation:

- Identification Information:
  - URL: The web address that specifies the location of the webpage.
  - Document Properties: Attributes such as scroll position and viewport dimensions that describe the current viewing context.
- Structural Hierarchy:
  - Root Element: The primary container for the webpage, indicating its overall theme or purpose.
  - Nested Elements: A hierarchy of sections, containers, and components that organize content logically (e.g., headers, footers, sidebars).
- Interactive Components:
  - Links: Elements that can be clicked to navigate to other pages or sections, often labeled descriptively.
  - Buttons: Interactive controls that trigger actions (e.g., submitting forms, opening menus).
- Content Types:
  - Text: Main content, headings, and subheadings that provide information and context.
  - Images and Media: Visual elements that enhance the understanding or appeal of the content.
  - Forms and Inputs: Fields for user input, including text boxes, dropdowns, and checkboxes.
- Functional Areas:
  - Navigation Menus: Organized sets of links that allow users to explore different sections of the site.
  - Search Interface: Components that enable users to search for content within the site, including input fields and associated buttons.
- State Information:
  - Visibility and Expand/Collapse States: Indicators showing whether certain elements are active, visible, or in a collapsed state, impacting user interaction.
  - Focus States: Information on which elements are currently focused, important for keyboard navigation and accessibility.
- Accessibility Features:
  - Role and Description Information: Metadata that provides context about the purpose of elements, useful for screen readers and assistive technologies.
- General User Considerations:
  - Navigation: Recognizing how to traverse the webpage using links and buttons.
  - Interactivity: Understanding how to engage with forms, search fields, and dynamic components.
  - Content Engagement: Identifying and interpreting various content types to glean necessary information.)PROMPT";

inline constexpr std::string_view kWebActionSpaceDoc =
    R"PROMPT(13 different types of actions are available.

noop(wait_ms: float = 1000)
    Examples:
        noop()
        noop(500)

send_msg_to_user(text: str)
    Examples:
        send_msg_to_user('Based on the results of my search, the city was built in 1751.')

scroll(delta_x: float, delta_y: float)
    Examples:
        scroll(0, 200)
        scroll(-50.2, -100.5)

fill(bid: str, value: str)
    Examples:
        fill('237', 'example value')
        fill('45', 'multi-line\nexample')
        fill('a12', 'example with "quotes"')

select_option(bid: str, options: str | list[str])
    Examples:
        select_option('a48', 'blue')
        select_option('c48', ['red', 'green', 'blue'])

click(bid: str, button: Literal['left', 'middle', 'right'] = 'left', modifiers: list[typing.Literal['Alt', 'Control', 'Meta', 'Shift']] = [])
    Examples:
        click('a51')
        click('b22', button='right')
        click('48', button='middle', modifiers=['Shift'])

dblclick(bid: str, button: Literal['left', 'middle', 'right'] = 'left', modifiers: list[typing.Literal['Alt', 'Control', 'Meta', 'Shift']] = [])
    Examples:
        dblclick('12')
        dblclick('ca42', button='right')
        dblclick('178', button='middle', modifiers=['Shift'])

hover(bid: str)
    Examples:
        hover('b8')

press(bid: str, key_comb: str)
    Examples:
        press('88', 'Backspace')
        press('a26', 'Control+a')
        press('a61', 'Meta+Shift+t')

focus(bid: str)
    Examples:
        focus('b455')

clear(bid: str)
    Examples:
        clear('996')

drag_and_drop(from_bid: str, to_bid: str)
    Examples:
        drag_and_drop('56', '498')

upload_file(bid: str, file: str | list[str])
    Examples:
        upload_file('572', 'my_receipt.pdf')
        upload_file('63', ['/home/bob/Documents/image.jpg', '/home/bob/Documents/file.zip'])

Only a single action can be provided at once. Example:
fill('a12', 'example with "quotes"'))PROMPT";

inline AgentIdentity default_web_identity() {
  return AgentIdentity{
      "Web Browsing Agent",
      std::string(kWebAgentDescription),
      std::string(kObservationSpaceDoc),
      std::string(kWebActionSpaceDoc),
  };
}

// --- flight question generation and judging ----------------------------------

inline constexpr std::string_view kFlightQaSystem =
    R"PROMPT(You are a creative writer who is an expert at crafting questions to help train assistants who answer user queries. Current date and time: {current_datetime})PROMPT";

// Shared instruction body for both the seed-generation and extension prompts.
inline constexpr std::string_view kFlightQaTaskBody = R"PROMPT(Your task is to create a robust benchmark for evaluating an AI's ability to search for flights through a platform like Google Flights. To ensure the dataset effectively represents real-world use cases. Here are some important factors to consider:

1. Diversity of Queries

- Range of Destinations: Include both common and obscure destinations to test how well the model handles varying levels of demand.

- Dates and Duration: Include different date ranges, including last-minute flights, peak travel dates (like holidays), and extended trips. Ensure there's a variety in trip duration as well.

- Passenger Variability: Include solo travelers, families, and group travel (e.g., one adult vs. two adults and two children) since these change the search parameters and price results.

- Class and Preference: Vary preferences like cabin class (economy, business, first) and filters (non-stop, one stop, preferred airlines, etc.).

- Budget Constraints: Test price sensitivity by setting different budget limits to see how well the AI handles trade-offs.

2. Complexity of Requirements

- Multi-Leg Flights: Add queries for multi-city trips or those requiring complex layovers.

- Dynamic Constraints: Include queries with dynamic constraints, such as "find the cheapest flight but depart between 8-10 AM," to see if the model can adapt its search within specific time frames.

- Conditional Preferences: Test cases where users might want options based on multiple conditions, like "either find the cheapest non-stop or the shortest two-stop option."

In practice, the questions typically vary in the following dimensions:

- Ticket type (round-trip, one-way, etc.)

- Routes (origin and destination)

- Layover location(s)

- Dates (departure and/or return)

- Flight time (departure and arrival)

- Total flight time

- Airlines

- Cabin class (economy, business, etc.)

- Aircraft

- Eco-friendly options (CO2 Emissions)

Given a number of constraints, you should first provide a list of constraints, with the number of constraints equal to the specification. After that, you will generate a question a typical user will ask which imposes those constraints. You should repeat this for at least 7 times to generate a set of questions with simple language. Make sure that the number of constraints in the question matches the number of constraints specified.

Do not include constraints about the number of passengers. If the constraint is a date, you can use relative dates (e.g., "tomorrow", "next month", "after 8 PM", etc.). Avoid using specific dates like "December 25th" to ensure the questions are relevant throughout the year.)PROMPT";

inline constexpr std::string_view kFlightQaGenerateTail = R"PROMPT(Your response should follow the JSON format below:

Number of Constraints: <num_constraints>
{
    "num_constraints": <num_constraints>,
    "questions": [
        {
            "constraints": [<constraints>],
            "question": <question>
        },
        ...
    ]
}

Below is a concrete example:

Number of Constraints: 3
{
    "num_constraints": 3,
    "questions": [
        {
            "constraints": ["one-way", "New York to London", "departing next Friday"],
            "question": "Can you find a one-way flight from New York to London departing next Friday?"
        },
        ...
    ]
}

Your Response:

Number of Constraints: {num_constraints})PROMPT";

inline constexpr std::string_view kFlightQaExtendTail = R"PROMPT(Your response should follow the JSON format below:

Maximum number of constraints: <max_constraints>

Starting constraints and questions:

{
    "num_constraints": <num_constraints>,
    "constraints": [<constraints>],
    "question": <question>
}

Questions with increasing complexity:

{
    "questions": [
        {
            "num_constraints": <starting num_constraints + 1>,
            "constraints": [<previous constraints with 1 additional>],
            "question": <question>
        },
        {
            "num_constraints": <starting num_constraints + 2>,
            "constraints": [<previous constraints with 2 additional>],
            "question": <question>
        },
        ... (continue until reaching the maximum number of constraints)
    ]
}

Your Response:

Maximum number of constraints: {max_num_constraints}

Starting constraints and questions:

{starting_constraint_questions}

Questions with increasing complexity:)PROMPT";

inline constexpr std::string_view kFlightQaJudgeTemplate = R"PROMPT(# Interaction Date and Time:

{interaction_datetime}

# Interaction History:

{interaction_history}

Above are the webpages an assistant interacted with while trying to answer the user's query.

The user is looking for flights with the following constraints:

{constraints}

Here is the exact query provided by the user:

{goal}

Here is the assistant's response:

{message}

Your task is to evaluate two aspects of the response:

1) Whether the assistant's response is supported by the interaction history, and

2) Whether the assistant's response satisfies the user constraints to the extent allowed by the results.

Some Context:

- To determine the seating class of a flight being returned, refer to the value of the "Change seating class" combobox.
- It is not always possible to satisfy all the user constraints. In this case, examine whether the response is as close to the user constraints as possible.

Answer in the following format:

<think>
Your thoughts and reasoning.
</think>

<grounding>
Your assessment of whether the response is supported by the interaction history. Answer "yes" or "no"
</grounding>

<relevance>
Your assessment of whether the response satisfies the user constraints to the extent allowed by the results. Answer "yes" or "no"
</relevance>)PROMPT";

inline std::string flightqa_system(const std::string& current_datetime) {
  return fill_template(kFlightQaSystem, {{"current_datetime", current_datetime}});
}

inline std::string flightqa_generate(int num_constraints) {
  std::string body = std::string(kFlightQaTaskBody) + "\n\n" + std::string(kFlightQaGenerateTail);
  return fill_template(body, {{"num_constraints", std::to_string(num_constraints)}});
}

inline std::string flightqa_extend(int max_num_constraints,
                                   const std::string& starting_constraint_questions) {
  std::string body = std::string(kFlightQaTaskBody) + "\n\n" + std::string(kFlightQaExtendTail);
  return fill_template(body,
                       {{"max_num_constraints", std::to_string(max_num_constraints)},
                        {"starting_constraint_questions", starting_constraint_questions}});
}

inline std::string flightqa_judge(const std::string& interaction_datetime,
                                  const std::string& interaction_history,
                                  const std::string& constraints, const std::string& goal,
                                  const std::string& message) {
  return fill_template(kFlightQaJudgeTemplate, {{"interaction_datetime", interaction_datetime},
                                                {"interaction_history", interaction_history},
                                                {"constraints", constraints},
                                                {"goal", goal},
                                                {"message", message}});
}

}  // namespace simura::prompts
