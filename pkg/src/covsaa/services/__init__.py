"""
@File       : __init__.py
@Description: 

@Time       : 2026/01/07 10:31
@Author     : hcy18
"""
