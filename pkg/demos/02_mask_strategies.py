"""Every mask-line strategy applied to one buggy conditional: complete
replacement and insertion, partial prefix/suffix reuse, and the templates
that target calls, boolean conditions, and operators."""

from collections import Counter

from clozerepair import analyze_line, generate_mask_lines, tokenize

buggy = "if (isValid(index) && count < limit) {"
tokens = tokenize(buggy)
print("buggy line:", buggy)
print("token count:", len(tokens))
print()

syntax = analyze_line(tokens)
print("detected calls     :",
      [" ".join(t.text for t in tokens[s:e]) for s, e in
       [c.name_span for c in syntax.method_calls]])
print("boolean condition  :",
      " ".join(t.text for t in
               tokens[syntax.boolean_condition[0]:syntax.boolean_condition[1]]))
print("replaceable ops    :", [site.text for site in syntax.operators])
print()

lines = generate_mask_lines(tokens)
counts = Counter(line.strategy for line in lines)
print(f"{len(lines)} mask lines after deduplication:")
for strategy, count in counts.items():
    print(f"  {strategy:<28} {count}")
print()

print("one example per strategy:")
shown = set()
for line in lines:
    if line.strategy in shown:
        continue
    shown.add(line.strategy)
    rendered = " ".join(line.rendered_texts())
    print(f"  [{line.insertion:<7}] {rendered}")
