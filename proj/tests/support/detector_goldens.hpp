// Golden detector cases: per-feature positive/negative example queries with
// their recorded labels, used to drive the LLM-judge backend through a
// replayed transcript.
#pragma once

#include <string>
#include <vector>

#include "qrisk/corpus.hpp"
#include "qrisk/features_names.hpp"

namespace testsupport {

struct GoldenCase {
  qrisk::FeatureName feature;
  std::string text;
  qrisk::Scenario scenario;
  bool expected;
};

inline std::vector<GoldenCase> detector_goldens() {
  using F = qrisk::FeatureName;
  using S = qrisk::Scenario;
  const S A = S::Abstractive, M = S::MultipleChoice, E = S::Extractive;
  return {
      // shared template examples
      {F::NegationUsage, "Why didn't the test run?", A, true},
      {F::NegationUsage, "Why did the test run?", A, false},
      {F::LackOfSpecificity, "Tell me about Tesla.", A, true},
      {F::LackOfSpecificity, "Summarize Tesla's 2024 Q4 earnings call in 5 bullets.", A, false},
      {F::NamedEntitiesPresent, "Did the CDC issue RSV guidance in 2024?", A, true},

      // anaphora
      {F::AnaphoraUsage, "Is he the same person who founded the company?", A, true},
      {F::AnaphoraUsage, "How does this compare to that paper from last year?", A, true},
      {F::AnaphoraUsage, "It was delayed again--when will it ship?", A, true},
      {F::AnaphoraUsage, "Who founded Apple?", A, false},
      {F::AnaphoraUsage, "Define photosynthesis.", A, false},

      // clause complexity
      {F::ClauseComplexity,
       "If the trial succeeds, which regulators will, according to the memo that leaked, "
       "approve it first?",
       A, true},
      {F::ClauseComplexity,
       "Summarize the study that was published last week, which compared three models.", A,
       true},
      {F::ClauseComplexity, "Although sales fell, margins improved.", A, true},
      {F::ClauseComplexity, "Who wrote The Road?", A, false},
      {F::ClauseComplexity, "Define GDP.", A, false},

      // query-scenario mismatch
      {F::QueryScenarioMismatch, "Extract the exact span containing the date.", A, true},
      {F::QueryScenarioMismatch, "Provide a free-form summary of the article.", M, true},
      {F::QueryScenarioMismatch, "Choose the correct option (A-D).", E, true},
      {F::QueryScenarioMismatch, "Summarize the passage in three bullets.", A, false},
      {F::QueryScenarioMismatch, "Select the best answer from the options.", M, false},

      // presupposition
      {F::Presupposition, "When did the CEO admit the fraud?", A, true},
      {F::Presupposition, "Who is the king of France now?", A, true},
      {F::Presupposition, "Why did the model fail again?", A, true},
      {F::Presupposition, "Who wrote Pride and Prejudice?", A, false},
      {F::Presupposition, "Define inflation.", A, false},

      // pragmatics
      {F::PragmaticFeatures, "Could you maybe tone that down a bit?", A, true},
      {F::PragmaticFeatures, "It's cold in here.", A, true},
      {F::PragmaticFeatures, "Is that really how we want to do this?", A, true},
      {F::PragmaticFeatures, "What is the capital of Japan?", A, false},
      {F::PragmaticFeatures, "Define entropy in thermodynamics.", A, false},

      // rare words
      {F::RareWordUsage, "Explain the pathophysiology of rhabdomyolysis.", A, true},
      {F::RareWordUsage, "Define syzygy in orbital mechanics.", A, true},
      {F::RareWordUsage, "What does heteroscedasticity mean?", A, true},
      {F::RareWordUsage, "What is a star?", A, false},
      {F::RareWordUsage, "Who was the first president of the US?", A, false},

      // negation
      {F::NegationUsage, "Which vaccines are not mRNA-based?", A, true},
      {F::NegationUsage, "Summarize the paper without mentioning formulas.", A, true},
      {F::NegationUsage, "Who wrote Hamlet?", A, false},
      {F::NegationUsage, "Define polymerase.", A, false},

      // superlative
      {F::SuperlativeUsage, "What is the fastest marine mammal?", A, true},
      {F::SuperlativeUsage, "Which city has the most museums?", A, true},
      {F::SuperlativeUsage, "What is the smallest prime number greater than 50?", A, true},
      {F::SuperlativeUsage, "Name a city with many museums.", A, false},
      {F::SuperlativeUsage, "Define prime number.", A, false},

      // polysemy
      {F::PolysemousWords, "How do I open a new account at the bank?", A, false},
      {F::PolysemousWords, "What is the weather like in Java?", A, true},
      {F::PolysemousWords, "Describe the function of a cell.", A, true},
      {F::PolysemousWords, "Mercury's orbital period is what?", A, true},
      {F::PolysemousWords, "Who wrote The Hobbit?", A, false},

      // answerability
      {F::Answerability, "Who wrote The Road?", A, true},
      {F::Answerability, "What is 17x19?", A, true},
      {F::Answerability, "Will Stock X crash next month?", A, false},
      {F::Answerability, "Should I move to New York?", A, false},
      {F::Answerability, "Is there life on Europa?", A, false},

      // excessive details
      {F::ExcessiveDetails,
       "In my blue notebook from last summer's trip to Italy, can you define mitosis?", A,
       true},
      {F::ExcessiveDetails, "Please, given my favorite mug and desk plant, what is 12x8?", A,
       true},
      {F::ExcessiveDetails, "When did WWI begin?", A, false},
      {F::ExcessiveDetails, "Summarize this article in 3 bullets.", A, false},
      {F::ExcessiveDetails, "What is the boiling point of water at sea level?", A, false},

      // subjectivity
      {F::Subjectivity, "Which smartphone is the best right now?", A, true},
      {F::Subjectivity, "Should I learn Rust or Go?", A, true},
      {F::Subjectivity, "Is modern art good?", A, true},
      {F::Subjectivity, "What's the battery capacity of iPhone 13?", A, false},
      {F::Subjectivity, "Define convolution.", A, false},

      // lack of specificity
      {F::LackOfSpecificity, "Compare the models.", A, true},
      {F::LackOfSpecificity, "What happened yesterday?", A, true},
      {F::LackOfSpecificity, "Extract the date of publication from the abstract.", A, false},

      // intention grounding
      {F::IntentionGrounding, "Summarize the article in three bullets.", A, true},
      {F::IntentionGrounding, "Extract the chemical formula from the passage.", A, true},
      {F::IntentionGrounding, "Compare Model A and Model B on latency and cost.", A, true},
      {F::IntentionGrounding, "Java?", A, false},
      {F::IntentionGrounding, "Tell me about space.", A, false},

      // contextual constraints
      {F::ContextualConstraints, "List three causes of inflation in the US during 2022.", A,
       true},
      {F::ContextualConstraints, "Summarize EU AI Act obligations for SMEs only.", A, true},
      {F::ContextualConstraints, "Give NYC subway delays after 10pm.", A, true},
      {F::ContextualConstraints, "Define inflation.", A, false},
      {F::ContextualConstraints, "Summarize the article.", A, false},

      // named entities
      {F::NamedEntitiesPresent, "Did Sundar Pichai announce Gemini in 2023?", A, true},
      {F::NamedEntitiesPresent, "What did the CDC advise about RSV in 2024?", A, true},
      {F::NamedEntitiesPresent, "When did World War I begin?", A, true},
      {F::NamedEntitiesPresent, "Who wrote that book?", A, false},
      {F::NamedEntitiesPresent, "Define a balanced tree.", A, false},

      // domain specificity
      {F::DomainSpecificity,
       "Interpret Section 230 immunity in the context of platform moderation.", A, true},
      {F::DomainSpecificity,
       "Differentiate Type I vs. Type II error and discuss alpha control.", A, true},
      {F::DomainSpecificity, "Explain CRISPR-Cas9 off-target effects.", A, true},
      {F::DomainSpecificity, "What is a triangle?", A, false},
      {F::DomainSpecificity, "Who was Ada Lovelace?", A, false},

      // feature-presence pairs (one positive, one negative per feature)
      {F::AnaphoraUsage,
       "Who was the guitarist for the English Rock band who Terry Kirkbride performed live "
       "in the studio with?",
       A, true},
      {F::AnaphoraUsage, "Isotopes are named for their number of protons plus what?", A,
       false},
      {F::ClauseComplexity,
       "During evolution, something happened to increase the size of what organ in humans, "
       "relative to that of the chimpanzee?",
       A, true},
      {F::ClauseComplexity, "What do some animals do to adjust to hot temperatures?", A,
       false},
      {F::QueryScenarioMismatch,
       "What type of forested areas can be found on the highest terrace?", A, true},
      {F::QueryScenarioMismatch,
       "What date in 2009 saw the heaviest UK snowfall since 1991?", A, false},
      {F::Presupposition, "Central America's Panama seceded from which country in 1903?", A,
       true},
      {F::Presupposition,
       "What is the scientific name of the true creature featured in \"Creature from the "
       "Black Lagoon\"?",
       A, false},
      {F::PragmaticFeatures, "Where did this pattern come from?", A, true},
      {F::PragmaticFeatures, "What is the name of plant-like protists?", A, false},
      {F::RareWordUsage, "Where in the human body can you find the Trapezium bone?", A, true},
      {F::RareWordUsage, "What is an organism at the top of the food chain called?", A,
       false},
      {F::NegationUsage, "Which is not an inherited trait in humans?", A, true},
      {F::NegationUsage, "Along with Walt Disney, who created Oswald the Lucky Rabbit?", A,
       false},
      {F::SuperlativeUsage, "What is the first stage of cellular respiration?", A, true},
      {F::SuperlativeUsage,
       "Which river forms a natural border between Argentina and Uruguay?", A, false},
      {F::NamedEntitiesPresent,
       "What borough are the neighborhood of Chelsea and the office building, 10 Hudson "
       "Yards, both a part of?",
       A, true},
      {F::NamedEntitiesPresent,
       "Some plants can detect increased levels of what when reflected from leaves of "
       "encroaching neighbors?",
       A, false},
      {F::PolysemousWords,
       "Who supervised the sting operation that implicated Evelyn Dawn Knight?", A, true},
      {F::PolysemousWords, "Which string instrument often played the basso continuo parts?",
       A, false},
      {F::Subjectivity, "What is a criticism of other streaming services?", A, true},
      {F::Subjectivity, "What is the second book in the Harry Potter series?", A, false},
      {F::Answerability, "How long was Warsaw occupied by Germany?", A, true},
      {F::Answerability, "Beyonc\xC3\xA9 would take a break from music in which year?", A,
       false},
      {F::ExcessiveDetails,
       "SkyWest Airlines is a North American airline owned by SkyWest, Inc. and "
       "headquartered in which city in Utah, U.S., it flies as SkyWest Airlines in a "
       "partnership with Alaska Airlines?",
       A, true},
      {F::ExcessiveDetails, "What is giving birth to dogs called?", A, false},
      {F::DomainSpecificity,
       "What is the term for a series of biochemical reactions by which an organism "
       "converts a given reactant to a specific end product?",
       A, true},
      {F::DomainSpecificity, "Fado is a type of folk music found in which country?", A,
       false},
      {F::LackOfSpecificity, "What division is the Canadian Army Doctrine of?", A, true},
      {F::LackOfSpecificity, "Winchester was the capital of which Anglo Saxon kingdom?", A,
       false},
      {F::IntentionGrounding,
       "Which of the two mines, Discovery Mine or Big Dan Mine, produced more gold?", A,
       true},
      {F::IntentionGrounding, "What are the two blocks of Catalan?", A, false},
      {F::ContextualConstraints,
       "Which is the least densely populated county of England?", A, true},
      {F::ContextualConstraints,
       "Who was the lyricist partner of Richard Rogers prior to Oscar Hammerstein?", A,
       false},
  };
}

}  // namespace testsupport
