# this comment rambles on well past the allowed width this comment rambles on well past the allowed width
x = 1
