// Annotation view: passage with selectable answer spans, an optional
// generated-question button, editable question/answer fields, and
// model-fooling feedback after each submission.
//
// Blind collection rule: nothing identifying the generator or sampler behind
// a session (the raw setting key, origin labels, model names) may ever reach
// rendered text.

import type { Api } from './api';
import { ApiError } from './api';
import { PassageView, codePointLength, type SourceSpan } from './offsets';
import { parseSetting, type SessionState, type SubmitResult } from './types';

const EXAMPLES_PER_SESSION = 5;

// placeholder task copy; deployments swap this wording freely
export const INSTRUCTIONS =
  'Write a question answered by a span of this passage, then select that span as the answer.';
export const INSTRUCTIONS_ADVERSARIAL =
  'Try to write questions the model answers incorrectly. A bonus is paid for each validated model-beating example.';

interface RangeLike {
  startContainer: Node;
  startOffset: number;
  endContainer: Node;
  endOffset: number;
}

export class AnnotateView {
  readonly passageView: PassageView;
  private selection: SourceSpan | null = null;
  private promptAnswer: SourceSpan | null = null;
  private completed: number;
  private readonly traits;

  private questionInput!: HTMLTextAreaElement;
  private answerLabel!: HTMLElement;
  private generateButton: HTMLButtonElement | null = null;
  private submitButton!: HTMLButtonElement;
  private notice!: HTMLElement;
  private banner!: HTMLElement;
  private counter!: HTMLElement;
  private controls!: HTMLElement;
  private completion!: HTMLElement;

  constructor(
    readonly root: HTMLElement,
    readonly api: Api,
    readonly session: SessionState,
  ) {
    this.traits = parseSetting(session.setting);
    this.completed = EXAMPLES_PER_SESSION - session.examples_remaining;
    const doc = root.ownerDocument;

    root.textContent = '';
    const title = doc.createElement('h2');
    title.textContent = session.passage.title;
    root.appendChild(title);

    this.counter = doc.createElement('div');
    this.counter.className = 'example-counter';
    root.appendChild(this.counter);

    const instructions = doc.createElement('p');
    instructions.className = 'instructions';
    instructions.textContent = this.traits.adversarial ? INSTRUCTIONS_ADVERSARIAL : INSTRUCTIONS;
    root.appendChild(instructions);

    const passageBox = doc.createElement('div');
    passageBox.className = 'passage';
    root.appendChild(passageBox);
    this.passageView = new PassageView(passageBox, session.passage.text);
    this.passageView.render();
    passageBox.addEventListener('mouseup', () => this.captureSelection());

    this.answerLabel = doc.createElement('div');
    this.answerLabel.className = 'answer-label';
    root.appendChild(this.answerLabel);

    const controls = doc.createElement('div');
    controls.className = 'controls';
    root.appendChild(controls);
    this.controls = controls;

    if (this.traits.assisted) {
      this.generateButton = doc.createElement('button');
      this.generateButton.className = 'generate-button';
      this.generateButton.textContent = 'Generate Question';
      this.generateButton.addEventListener('click', () => void this.onGenerate());
      controls.appendChild(this.generateButton);
    }

    this.questionInput = doc.createElement('textarea');
    this.questionInput.className = 'question-input';
    this.questionInput.placeholder = 'Your question';
    controls.appendChild(this.questionInput);

    this.submitButton = doc.createElement('button');
    this.submitButton.className = 'submit-button';
    this.submitButton.textContent = 'Submit example';
    this.submitButton.addEventListener('click', () => void this.onSubmit());
    controls.appendChild(this.submitButton);

    this.notice = doc.createElement('div');
    this.notice.className = 'notice';
    root.appendChild(this.notice);

    this.banner = doc.createElement('div');
    this.banner.className = 'feedback-banner';
    root.appendChild(this.banner);

    this.completion = doc.createElement('div');
    this.completion.className = 'completion-screen';
    this.completion.hidden = true;
    root.appendChild(this.completion);

    this.refresh();
  }

  get currentAnswer(): SourceSpan | null {
    return this.selection ?? this.promptAnswer;
  }

  private refresh(): void {
    const done = this.completed >= EXAMPLES_PER_SESSION;
    this.counter.textContent = done
      ? 'Session complete'
      : `Example ${this.completed + 1} of ${EXAMPLES_PER_SESSION}`;
    this.controls.hidden = done;
    this.completion.hidden = !done;
    if (done) {
      this.completion.textContent = 'All five examples are in. Thanks for annotating!';
    }
    const answer = this.currentAnswer;
    this.answerLabel.textContent = answer
      ? `Selected answer: "${answer.text}"`
      : 'No answer selected yet';
    if (this.generateButton) {
      // question-only serving needs a span first; answer prompting does not
      this.generateButton.disabled =
        !this.traits.answerPrompting && this.selection === null;
    }
    this.submitButton.disabled =
      this.completed >= EXAMPLES_PER_SESSION || answer === null;
  }

  private captureSelection(): void {
    const doc = this.root.ownerDocument;
    const sel = doc.defaultView?.getSelection();
    if (!sel || sel.rangeCount === 0 || sel.isCollapsed) return;
    this.selectRange(sel.getRangeAt(0));
  }

  /** Turns a DOM range over the passage into the working answer span. */
  selectRange(range: RangeLike): SourceSpan | null {
    const span = this.passageView.spanFromRange(range);
    if (span !== null) {
      this.selection = span;
      this.refresh();
    }
    return span;
  }

  async onGenerate(): Promise<void> {
    this.notice.textContent = '';
    const answer = this.traits.answerPrompting ? null : this.selection;
    if (!this.traits.answerPrompting && answer === null) {
      this.notice.textContent = 'Select an answer span first.';
      return;
    }
    try {
      const prompt = await this.api.requestPrompt(
        this.session.session_id,
        answer === null ? null : { text: answer.text, char_start: answer.char_start },
      );
      this.questionInput.value = prompt.question;
      if (this.traits.answerPrompting) {
        this.promptAnswer = { text: prompt.answer.text, char_start: prompt.answer.char_start };
        this.selection = null;
        this.passageView.render({
          charStart: prompt.answer.char_start,
          charEnd: prompt.answer.char_start + codePointLength(prompt.answer.text),
        });
      }
      this.refresh();
    } catch (err) {
      if (err instanceof ApiError) {
        // non-blocking: free writing continues
        this.notice.textContent = 'No generated question is available; write your own.';
        return;
      }
      throw err;
    }
  }

  async onSubmit(): Promise<void> {
    const answer = this.currentAnswer;
    const question = this.questionInput.value.trim();
    if (answer === null || question === '') {
      this.notice.textContent = 'A question and an answer span are both required.';
      return;
    }
    // stable per example slot, so an accidental double submit dedupes server-side
    const key = `${this.session.session_id}:${this.completed}`;
    let result: SubmitResult;
    try {
      result = await this.api.submit(
        this.session.session_id,
        question,
        { text: answer.text, char_start: answer.char_start },
        key,
      );
    } catch (err) {
      if (err instanceof ApiError) {
        this.notice.textContent = `Submission failed: ${err.message}`;
        return;
      }
      throw err;
    }
    this.completed += 1;
    this.showFeedback(result);
    this.selection = null;
    this.promptAnswer = null;
    this.questionInput.value = '';
    this.passageView.render();
    this.refresh();
  }

  private showFeedback(result: SubmitResult): void {
    if (!this.traits.adversarial || result.fooled === null) {
      this.banner.textContent = 'Example recorded.';
      this.banner.dataset['state'] = 'recorded';
      return;
    }
    if (result.fooled) {
      this.banner.textContent = 'You beat the model! The example goes to validation for the bonus.';
      this.banner.dataset['state'] = 'fooled';
    } else {
      const predicted = result.model_prediction?.answer.text ?? '';
      this.banner.textContent = `The model answered correctly: "${predicted}". Try a harder question.`;
      this.banner.dataset['state'] = 'not-fooled';
    }
  }
}
